//! The emissions-cap and grid demand-response case studies.
//!
//! Both scenarios run on the same engine path. They differ in which policy
//! coordinates exist, how the effective price is formed (emissions: tax λ
//! minus subsidy σ, floored at 0; grid: tariff multiplier λ), and how the
//! causal graph names the system state.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use rayon::prelude::*;

use crate::analysis::design::{sample_design, DesignMethod, DEFAULT_GRID_CAP};
use crate::analysis::features::{extract_features, RunFeatures};
use crate::config::ConfigDoc;
use crate::control::{
    apply_intervention, validate_scm, PolicyCoordinate, PolicyVector, Regime, ScmEdge, ScmGraph, SearchParams,
};
use crate::diagnostics::{analyze, DiagnosticParams, InfoMeasures};
use crate::engine::{
    AssignmentRule, BehaviorParams, CongestionParams, PhiWeights, PopulationSource, PriceRule, RunRecord, SimConfig,
    TopologySpec, DEFAULT_VOLATILITY_WINDOW,
};
use crate::environment::{self, Node};
use crate::population::{self, AttributePrior};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Emissions,
    Grid,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Emissions => "emissions",
            ScenarioKind::Grid => "grid",
        }
    }

    fn allowed_coordinates(self) -> &'static [&'static str] {
        match self {
            ScenarioKind::Emissions => &["lambda", "tau", "sigma"],
            ScenarioKind::Grid => &["lambda", "tau"],
        }
    }

    fn state_var(self) -> &'static str {
        match self {
            ScenarioKind::Emissions => "E_t",
            ScenarioKind::Grid => "s_t",
        }
    }
}

/// Peak/off-peak sinusoid times a multiplicative gaussian shock.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandPattern {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    /// Shock standard deviation σ_ζ.
    #[serde(default)]
    pub sigma: f64,
}

fn default_period() -> f64 {
    24.0
}

impl Default for DemandPattern {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            period: default_period(),
            sigma: 0.0,
        }
    }
}

impl DemandPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::schema("demand.sigma", "must be finite and >= 0"));
        }
        if !(self.period >= 2.0) {
            return Err(Error::schema("demand.period", "must be >= 2"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::schema("demand.amplitude", "must be finite"));
        }
        Ok(())
    }
}

/// Demand scale `X_t = max(0, 1 + A·sin(2πt/period)) · max(0, 1 + N(0, σ_ζ))`.
///
/// No random number is consumed when σ_ζ = 0.
pub fn exogenous_demand<R: Rng + ?Sized>(t: usize, pattern: &DemandPattern, rng: &mut R) -> f64 {
    let mut scale = 1.0;
    if pattern.amplitude != 0.0 {
        let phase = 2.0 * std::f64::consts::PI * t as f64 / pattern.period;
        scale = (1.0 + pattern.amplitude * phase.sin()).max(0.0);
    }
    if pattern.sigma > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        scale *= (1.0 + pattern.sigma * z).max(0.0);
    }
    scale
}

/// Switches implied by a regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimePreset {
    pub regime: Regime,
    pub policy_search: bool,
    pub zero_eta: bool,
}

impl From<Regime> for RegimePreset {
    fn from(regime: Regime) -> Self {
        Self {
            regime,
            policy_search: regime.varies_policy(),
            zero_eta: !regime.adapts_agents(),
        }
    }
}

/// Causal graph over exogenous drivers, attributes, policy, state and outcomes.
pub fn default_scm(kind: ScenarioKind, regime: Regime) -> ScmGraph {
    let s = kind.state_var();
    let mut edges = vec![
        ScmEdge::now("P_t", s),
        ScmEdge::now("Theta", s),
        ScmEdge::now("X_t", s),
        ScmEdge::now(s, "Y_t"),
    ];
    if regime.varies_policy() {
        edges.push(ScmEdge::next(s, "P_t"));
    }
    ScmGraph {
        variables: ["X_t", "Theta", "P_t", s, "Y_t"].map(String::from).to_vec(),
        edges,
        policy_var: "P_t".into(),
        state_var: s.into(),
        intervention: None,
    }
}

// ---- file schema ----------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for WeightsSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionSpec {
    #[serde(default)]
    pub gain: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.9
}

impl Default for CongestionSpec {
    fn default() -> Self {
        Self {
            gain: 0.0,
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSpec {
    #[serde(default)]
    pub relax: f64,
    #[serde(default = "one")]
    pub belief_smoothing: f64,
    #[serde(default)]
    pub lookahead: usize,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
}

fn default_x_max() -> f64 {
    1.0e6
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        Self {
            relax: 0.0,
            belief_smoothing: 1.0,
            lookahead: 0,
            x_max: default_x_max(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default = "default_epoch")]
    pub epoch_length: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Defaults to the epoch length.
    pub window: Option<usize>,
    #[serde(default = "one")]
    pub step_decay: f64,
}

fn default_epoch() -> usize {
    crate::control::DEFAULT_EPOCH
}

fn default_tolerance() -> f64 {
    crate::control::DEFAULT_TOLERANCE
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            epoch_length: default_epoch(),
            tolerance: default_tolerance(),
            window: None,
            step_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub agents: Option<usize>,
    #[serde(default)]
    pub priors: Vec<AttributePrior>,
    /// Population CSV as written by `synth`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    /// Single node (global cap) capacity.
    pub capacity: Option<f64>,
    /// One node per entry.
    pub node_capacities: Option<Vec<f64>>,
    /// `nodes` identical nodes of `node_capacity` each.
    pub nodes: Option<usize>,
    pub node_capacity: Option<f64>,
    pub nodes_file: Option<PathBuf>,
    pub edges_file: Option<PathBuf>,
    #[serde(default)]
    pub capacity_schedule: Vec<f64>,
    pub assignment: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    /// Dotted path of a numeric config field.
    pub path: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub parameters: Vec<SweepParameter>,
    #[serde(default)]
    pub method: Option<DesignMethod>,
    /// Extra regime axis; defaults to the configured regime.
    #[serde(default)]
    pub regimes: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorrisSpec {
    pub parameters: Vec<SweepParameter>,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// `linear` evaluates `Σ coef_k · param_k` instead of running the simulator.
    pub function: Option<String>,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

fn default_trajectories() -> usize {
    10
}

fn default_levels() -> usize {
    4
}

/// Top-level experiment file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub scenario: ScenarioKind,
    pub regime: String,
    pub horizon: usize,
    pub window: usize,
    pub burn_in: Option<usize>,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_vol_window")]
    pub volatility_window: usize,
    #[serde(default)]
    pub record_node_loads: bool,
    pub workers: Option<usize>,
    pub policy: BTreeMap<String, PolicySpec>,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub congestion: CongestionSpec,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    #[serde(default)]
    pub demand: DemandPattern,
    #[serde(default)]
    pub search: SearchSpec,
    pub population: PopulationSpec,
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticParams,
    pub sweep: Option<SweepSpec>,
    pub morris: Option<MorrisSpec>,
    /// `do(P = p)` pins by coordinate name.
    #[serde(default)]
    pub intervention: BTreeMap<String, f64>,
}

fn one_usize() -> usize {
    1
}

fn default_vol_window() -> usize {
    DEFAULT_VOLATILITY_WINDOW
}

/// A configuration bound to the engine, with its graph and analysis settings.
#[derive(Debug, Clone)]
pub struct BoundScenario {
    pub kind: ScenarioKind,
    pub preset: RegimePreset,
    pub sim: SimConfig,
    pub scm: ScmGraph,
    pub diagnostics: DiagnosticParams,
    pub sweep: Option<SweepSpec>,
    pub morris: Option<MorrisSpec>,
    pub workers: Option<usize>,
    pub doc: ConfigDoc,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Validate a configuration and wire it to the engine.
///
/// Relative file references are resolved against `base_dir`.
pub fn build_scenario(doc: &ConfigDoc, base_dir: &Path) -> Result<BoundScenario> {
    let file: ExperimentFile = doc.deserialize()?;
    let kind = file.scenario;
    let regime = Regime::from_str(&file.regime)?;
    let preset = RegimePreset::from(regime);

    if file.policy.is_empty() {
        return Err(Error::schema("policy", "at least the lambda coordinate is required"));
    }
    if !file.policy.contains_key("lambda") {
        return Err(Error::schema("policy.lambda", "price coordinate is required"));
    }
    let mut coords = Vec::new();
    for (name, spec) in &file.policy {
        if !kind.allowed_coordinates().contains(&name.as_str()) {
            return Err(Error::schema(
                format!("policy.{name}"),
                format!("not a {} policy coordinate", kind.as_str()),
            ));
        }
        coords.push(PolicyCoordinate {
            name: name.clone(),
            value: spec.value,
            lower: spec.lower,
            upper: spec.upper,
            step: spec.step,
        });
    }
    let policy = PolicyVector::new(coords)?;
    let price_rule = PriceRule {
        price: policy.index_of("lambda").expect("checked above"),
        offset: policy.index_of("sigma"),
        threshold: policy.index_of("tau"),
    };
    if let Some(k) = price_rule.offset {
        if policy.coordinates()[k].lower < 0.0 {
            return Err(Error::schema("policy.sigma.lower", "subsidy must be >= 0"));
        }
    }

    let population = match (&file.population.file, file.population.agents) {
        (Some(path), _) => {
            let pop = population::read_population(open(&resolve(base_dir, path))?)?;
            if pop.is_empty() {
                return Err(Error::schema("population.file", "population is empty"));
            }
            PopulationSource::Fixed(pop)
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(Error::schema("population.agents", "must be >= 1"));
            }
            for p in &file.population.priors {
                p.validate()?;
            }
            for needed in ["theta", "eta"] {
                if !file.population.priors.iter().any(|p| p.attribute == needed) {
                    return Err(Error::schema(
                        "population.priors",
                        format!("missing prior for {needed}"),
                    ));
                }
            }
            PopulationSource::Priors {
                n,
                priors: file.population.priors.clone(),
            }
        }
        (None, None) => {
            return Err(Error::schema("population", "give either agents + priors or file"));
        }
    };

    let env = &file.environment;
    let (nodes, edges) = if let Some(path) = &env.nodes_file {
        let nodes_f = open(&resolve(base_dir, path))?;
        let edges_f = env
            .edges_file
            .as_ref()
            .map(|p| open(&resolve(base_dir, p)))
            .transpose()?;
        environment::read_nodes(nodes_f, edges_f)?
    } else {
        let caps: Vec<f64> = match (&env.node_capacities, env.nodes, env.node_capacity, env.capacity) {
            (Some(c), _, _, _) => c.clone(),
            (None, Some(m), Some(c), _) => vec![c; m],
            (None, None, None, Some(c)) => vec![c],
            _ => {
                return Err(Error::schema(
                    "environment",
                    "give capacity, node_capacities, nodes + node_capacity, or nodes_file",
                ))
            }
        };
        let nodes = caps
            .iter()
            .enumerate()
            .map(|(j, c)| Node {
                id: j.to_string(),
                capacity: *c,
                sector: None,
            })
            .collect();
        (nodes, Vec::new())
    };
    // validates capacities and edge endpoints
    environment::Topology::new(nodes.clone(), edges.clone(), Vec::new())?;
    let assignment = match env.assignment.as_deref() {
        None | Some("random") => AssignmentRule::Random,
        Some("round_robin") => AssignmentRule::RoundRobin,
        Some("file") => AssignmentRule::FromPopulation,
        Some(other) => {
            return Err(Error::schema(
                "environment.assignment",
                format!("unknown rule '{other}'"),
            ));
        }
    };
    if assignment == AssignmentRule::FromPopulation && !matches!(population, PopulationSource::Fixed(_)) {
        return Err(Error::schema("environment.assignment", "'file' needs population.file"));
    }

    let mut scm = default_scm(kind, regime);
    validate_scm(&scm)?;
    let intervention = if file.intervention.is_empty() {
        None
    } else {
        let mut pinned = policy.clone();
        for (name, v) in &file.intervention {
            pinned.set(name, *v)?;
        }
        scm = apply_intervention(&scm, pinned.clone())?;
        Some(pinned)
    };

    let search = SearchParams {
        epoch_length: file.search.epoch_length,
        tolerance: file.search.tolerance,
        window: file.search.window.unwrap_or(file.search.epoch_length).max(1),
        step_decay: file.search.step_decay,
    };
    if search.epoch_length == 0 {
        return Err(Error::schema("search.epoch_length", "must be >= 1"));
    }
    if !(search.step_decay > 0.0 && search.step_decay <= 1.0) {
        return Err(Error::schema("search.step_decay", "must lie in (0, 1]"));
    }

    let sim = SimConfig {
        scenario: kind,
        horizon: file.horizon,
        window: file.window,
        burn_in: file.burn_in.unwrap_or(file.horizon / 4),
        regime,
        policy,
        price_rule,
        weights: PhiWeights {
            alpha: file.weights.alpha,
            beta: file.weights.beta,
            gamma: file.weights.gamma,
        },
        congestion: CongestionParams {
            threshold: file.congestion.threshold,
            gain: file.congestion.gain,
        },
        behavior: BehaviorParams {
            relax: file.behavior.relax,
            belief_smoothing: file.behavior.belief_smoothing,
            lookahead: file.behavior.lookahead,
            x_max: file.behavior.x_max,
        },
        demand: file.demand,
        capacity_schedule: env.capacity_schedule.clone(),
        volatility_window: file.volatility_window,
        search,
        population,
        topology: TopologySpec {
            nodes,
            edges,
            assignment,
        },
        intervention,
        replications: file.replications,
        master_seed: file.seed,
        record_node_loads: file.record_node_loads,
        fingerprint: doc.fingerprint(),
    };
    sim.validate()?;
    file.diagnostics.validate()?;
    if let Some(sweep) = &file.sweep {
        for r in &sweep.regimes {
            Regime::from_str(r)?;
        }
        for p in &sweep.parameters {
            if doc.get(&p.path).is_none() && doc.get(&format!("{}.value", p.path)).is_none() {
                return Err(Error::schema(
                    format!("sweep.parameters.{}", p.path),
                    "no such config field",
                ));
            }
            if !(p.low < p.high) {
                return Err(Error::schema(
                    format!("sweep.parameters.{}", p.path),
                    "low must be < high",
                ));
            }
        }
    }
    Ok(BoundScenario {
        kind,
        preset,
        sim,
        scm,
        diagnostics: file.diagnostics,
        sweep: file.sweep,
        morris: file.morris,
        workers: file.workers,
        doc: doc.clone(),
    })
}

/// Copy of `doc` with numeric fields overwritten by dotted path.
pub fn with_overrides(doc: &ConfigDoc, overrides: &[(String, f64)]) -> Result<ConfigDoc> {
    let mut out = doc.clone();
    for (path, v) in overrides {
        out.set_number(path, *v)?;
    }
    Ok(out)
}

/// Mean J over the configured replications at an override point. This is
/// the black-box evaluator used by screening and offline search.
pub fn evaluate_overrides(doc: &ConfigDoc, base_dir: &Path, overrides: &[(String, f64)]) -> Result<f64> {
    let bound = build_scenario(&with_overrides(doc, overrides)?, base_dir)?;
    Ok(crate::engine::replicate(&bound.sim, bound.sim.replications)?.mean_j)
}

/// Diagnostics of one run, computed on the post-burn-in part of the series.
pub fn diagnose_run(run: &RunRecord, params: &DiagnosticParams) -> Result<InfoMeasures> {
    let start = run.burn_in.min(run.len());
    analyze(&run.aggregate[start..], &run.overload[start..], params)
}

/// One design point of a sweep, as `(path, value)` overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub overrides: Vec<(String, f64)>,
}

/// Design points of the `[sweep]` table; a missing or empty table is the
/// single base point. Without a method the grid uses 3 levels.
pub fn sweep_points(doc: &ConfigDoc) -> Result<Vec<SweepPoint>> {
    let file: ExperimentFile = doc.deserialize()?;
    let spec = match file.sweep {
        Some(s) if !s.parameters.is_empty() => s,
        _ => {
            return Ok(vec![SweepPoint {
                index: 0,
                overrides: Vec::new(),
            }])
        }
    };
    let ranges: Vec<(f64, f64)> = spec.parameters.iter().map(|p| (p.low, p.high)).collect();
    let method = spec.method.unwrap_or(DesignMethod::Grid { levels: 3 });
    let design = sample_design(&ranges, &method, DEFAULT_GRID_CAP)?;
    Ok(design
        .into_iter()
        .enumerate()
        .map(|(index, x)| SweepPoint {
            index,
            overrides: spec.parameters.iter().map(|p| p.path.clone()).zip(x).collect(),
        })
        .collect())
}

/// Run every design point under every sweep regime with the configured
/// replications and return one feature row per run, in
/// point × regime × replication order. The run id is
/// `p<point>-<regime>-r<replication>` and the label is `p<point>`.
pub fn run_sweep(doc: &ConfigDoc, base_dir: &Path) -> Result<Vec<RunFeatures>> {
    let file: ExperimentFile = doc.deserialize()?;
    let regimes = match &file.sweep {
        Some(s) if !s.regimes.is_empty() => s.regimes.clone(),
        _ => vec![file.regime.clone()],
    };
    for r in &regimes {
        Regime::from_str(r)?;
    }
    let points = sweep_points(doc)?;
    let jobs: Vec<(&SweepPoint, &String)> = points
        .iter()
        .flat_map(|p| regimes.iter().map(move |r| (p, r)))
        .collect();
    let blocks: Vec<Vec<RunFeatures>> = jobs
        .par_iter()
        .map(|(point, regime)| {
            let mut d = with_overrides(doc, &point.overrides)?;
            d.set_string("regime", regime);
            let bound = build_scenario(&d, base_dir)?;
            let batch = crate::engine::replicate(&bound.sim, bound.sim.replications)?;
            let label = format!("p{}", point.index);
            batch
                .records
                .iter()
                .enumerate()
                .map(|(r, rec)| {
                    let info = diagnose_run(rec, &bound.diagnostics)?;
                    Ok(extract_features(rec, &info, &format!("{label}-{regime}-r{r}"), &label))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}
