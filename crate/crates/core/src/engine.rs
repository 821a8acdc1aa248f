//! The discrete-time loop.
//!
//! Each step runs in a fixed order: draw the exogenous demand factor, let
//! agents update beliefs and act, aggregate loads and compute congestion,
//! overload and volatility, score Φ, give the policy rule G its turn and
//! record the step. Agents always react to the policy and congestion of the
//! previous step.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::behavior::{self, AdaptiveParams, AgentState, BeliefState};
use crate::control::{self, PolicyVector, Regime, SearchParams, SearchState};
use crate::environment::{self, Node, Topology};
use crate::population::{self, AttributePrior, SyntheticPopulation};
use crate::rng::{replication_seed, stream_rng, streams, SimRng};
use crate::scenarios::{exogenous_demand, DemandPattern, ScenarioKind};
use crate::{Error, Result};

pub const DEFAULT_VOLATILITY_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionParams {
    /// Threshold τ used when the policy has no threshold coordinate.
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorParams {
    pub relax: f64,
    pub belief_smoothing: f64,
    pub lookahead: usize,
    pub x_max: f64,
}

/// Which policy coordinates the agents and the grid operator read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRule {
    pub price: usize,
    /// Subtracted from the price (emissions subsidy σ).
    pub offset: Option<usize>,
    /// Congestion threshold τ.
    pub threshold: Option<usize>,
}

impl PriceRule {
    pub fn effective_price(&self, policy: &[f64]) -> f64 {
        let p = policy[self.price] - self.offset.map_or(0.0, |k| policy[k]);
        p.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSource {
    /// `n` agents with θ and η drawn from priors, redrawn per replication.
    Priors { n: usize, priors: Vec<AttributePrior> },
    /// A fixed population (for example one produced by `synth`).
    Fixed(SyntheticPopulation),
}

impl PopulationSource {
    pub fn len(&self) -> usize {
        match self {
            PopulationSource::Priors { n, .. } => *n,
            PopulationSource::Fixed(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentRule {
    Random,
    RoundRobin,
    /// Use the `node` recorded on each agent of a fixed population.
    FromPopulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    pub assignment: AssignmentRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    pub horizon: usize,
    pub window: usize,
    pub burn_in: usize,
    pub regime: Regime,
    pub policy: PolicyVector,
    pub price_rule: PriceRule,
    pub weights: PhiWeights,
    pub congestion: CongestionParams,
    pub behavior: BehaviorParams,
    pub demand: DemandPattern,
    /// Per-step capacity multipliers; the last value is held.
    pub capacity_schedule: Vec<f64>,
    pub volatility_window: usize,
    pub search: SearchParams,
    pub population: PopulationSource,
    pub topology: TopologySpec,
    /// Policy pinned by `do(P = p)`; disables G.
    pub intervention: Option<PolicyVector>,
    pub replications: usize,
    pub master_seed: u64,
    pub record_node_loads: bool,
    pub fingerprint: String,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::schema("horizon", "must be >= 1"));
        }
        if self.window == 0 || self.window > self.horizon {
            return Err(Error::schema("window", "must satisfy 1 <= K <= T"));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::schema("burn_in", "must be smaller than the horizon"));
        }
        let w = self.weights;
        if [w.alpha, w.beta, w.gamma].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::schema("weights", "alpha, beta, gamma must be finite and >= 0"));
        }
        if self.replications == 0 {
            return Err(Error::schema("replications", "must be >= 1"));
        }
        if !(self.congestion.gain >= 0.0) || !(self.congestion.threshold >= 0.0) {
            return Err(Error::schema("congestion", "gain and threshold must be >= 0"));
        }
        let b = self.behavior;
        if !(0.0..=1.0).contains(&b.relax) {
            return Err(Error::schema("behavior.relax", "must lie in [0, 1]"));
        }
        if !(b.belief_smoothing > 0.0 && b.belief_smoothing <= 1.0) {
            return Err(Error::schema("behavior.belief_smoothing", "must lie in (0, 1]"));
        }
        if !(b.x_max > 0.0) {
            return Err(Error::schema("behavior.x_max", "must be > 0"));
        }
        if self.volatility_window < 2 {
            return Err(Error::schema("volatility_window", "must be >= 2"));
        }
        if self.capacity_schedule.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::schema("capacity_schedule", "multipliers must be > 0"));
        }
        if self.population.is_empty() {
            return Err(Error::schema("population", "at least one agent is required"));
        }
        self.demand.validate()?;
        Ok(())
    }

    pub fn capacity_scale(&self, t: usize) -> f64 {
        match self.capacity_schedule.len() {
            0 => 1.0,
            n => self.capacity_schedule[t.min(n - 1)],
        }
    }

    /// Whether G runs in this configuration.
    pub fn policy_search_active(&self) -> bool {
        self.regime.varies_policy() && self.intervention.is_none()
    }
}

/// Everything recorded about one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy_names: Vec<String>,
    pub aggregate: Vec<f64>,
    pub overload: Vec<f64>,
    pub volatility: Vec<f64>,
    pub phi: Vec<f64>,
    pub policy: Vec<Vec<f64>>,
    pub node_loads: Option<Vec<Vec<f64>>>,
    pub j: f64,
    pub seed: u64,
    pub config_hash: String,
    pub regime: Regime,
    pub burn_in: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_hash: String,
    #[serde(rename = "J")]
    pub j: f64,
    pub mean_aggregate: f64,
    pub overload_freq: f64,
    pub regime: String,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }

    /// Aggregate series after burn-in.
    pub fn post_burn_in(&self) -> &[f64] {
        &self.aggregate[self.burn_in.min(self.len())..]
    }

    pub fn mean_aggregate(&self) -> f64 {
        mean(self.post_burn_in())
    }

    /// Fraction of post-burn-in steps with O_t > 0.
    pub fn overload_freq(&self) -> f64 {
        let o = &self.overload[self.burn_in.min(self.len())..];
        if o.is_empty() {
            return 0.0;
        }
        o.iter().filter(|x| **x > 0.0).count() as f64 / o.len() as f64
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            j: self.j,
            mean_aggregate: self.mean_aggregate(),
            overload_freq: self.overload_freq(),
            regime: self.regime.to_string(),
        }
    }

    /// `t, aggregate, overload, volatility, phi, <policy coords...>` preceded
    /// by a `#` comment line carrying the seed and config fingerprint.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# config_hash={} seed={} regime={}",
            self.config_hash, self.seed, self.regime
        )?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<String> = ["t", "aggregate", "overload", "volatility", "phi"]
            .map(String::from)
            .to_vec();
        header.extend(self.policy_names.iter().cloned());
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![
                t.to_string(),
                self.aggregate[t].to_string(),
                self.overload[t].to_string(),
                self.volatility[t].to_string(),
                self.phi[t].to_string(),
            ];
            row.extend(self.policy[t].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than 2 values.
pub(crate) fn sample_sd<'a>(xs: impl ExactSizeIterator<Item = &'a f64> + Clone) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.clone().sum::<f64>() / n as f64;
    let ss: f64 = xs.map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// `Φ = −α·aggregate − β·O − γ·V`.
pub fn phi(aggregate: f64, overload: f64, volatility: f64, weights: &PhiWeights) -> f64 {
    -weights.alpha * aggregate - weights.beta * overload - weights.gamma * volatility
}

/// Mean of Φ over the last `window` steps.
pub fn evaluate_j(phi: &[f64], window: usize) -> Result<f64> {
    if window == 0 || window > phi.len() {
        return Err(Error::WindowTooLong { window, len: phi.len() });
    }
    Ok(mean(&phi[phi.len() - window..]))
}

/// Rolling sample standard deviation of the last `min(len, window)` values.
pub fn volatility(history: &[f64], window: usize) -> f64 {
    let start = history.len().saturating_sub(window.max(2));
    sample_sd(history[start..].iter())
}

/// One step's observables.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub aggregate: f64,
    pub overload: f64,
    pub volatility: f64,
    pub phi: f64,
    pub policy: Vec<f64>,
    pub loads: Vec<f64>,
    pub actions_changed: bool,
}

/// A run in progress.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    cfg: &'a SimConfig,
    seed: u64,
    agents: Vec<AgentState>,
    topology: Topology,
    policy: PolicyVector,
    prev_policy: Vec<f64>,
    belief: BeliefState,
    search: SearchState,
    congestion: Vec<f64>,
    recent_aggregate: VecDeque<f64>,
    recent_phi: VecDeque<f64>,
    shocks: SimRng,
    t: usize,
}

impl<'a> Simulation<'a> {
    /// Build the population and topology for a run seeded with `seed`.
    pub fn new(cfg: &'a SimConfig, seed: u64) -> Result<Self> {
        let population = match &cfg.population {
            PopulationSource::Priors { n, priors } => {
                population::draw_behavioral_attributes(SyntheticPopulation::blank(*n), priors, seed)?
            }
            PopulationSource::Fixed(p) => p.clone(),
        };
        let n = population.len();
        let m = cfg.topology.nodes.len();
        let assignment = match cfg.topology.assignment {
            AssignmentRule::RoundRobin => environment::round_robin_assignment(n, m),
            AssignmentRule::Random => environment::random_assignment(n, m, &mut stream_rng(seed, streams::ASSIGNMENT)),
            AssignmentRule::FromPopulation => population
                .agents
                .iter()
                .map(|a| {
                    a.node
                        .ok_or_else(|| Error::schema("population.node", format!("agent {} has no node", a.id)))
                })
                .collect::<Result<_>>()?,
        };
        let topology = Topology::new(cfg.topology.nodes.clone(), cfg.topology.edges.clone(), assignment)?;
        let adapts = cfg.regime.adapts_agents();
        let agents = population
            .agents
            .iter()
            .map(|a| AgentState {
                id: a.id,
                theta: a.theta,
                // constant-agent regimes switch learning off
                eta: if adapts { a.eta } else { 0.0 },
                action: 0.0,
            })
            .collect();
        let policy = cfg.intervention.clone().unwrap_or_else(|| cfg.policy.clone());
        let values = policy.values();
        Ok(Self {
            cfg,
            seed,
            agents,
            belief: BeliefState::new(&values, behavior::MIN_HISTORY),
            search: SearchState::new(policy.len()),
            prev_policy: values,
            policy,
            congestion: vec![0.0; m],
            recent_aggregate: VecDeque::with_capacity(cfg.volatility_window),
            recent_phi: VecDeque::with_capacity(cfg.search.window.max(1)),
            shocks: stream_rng(seed, streams::SHOCKS),
            topology,
            t: 0,
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn policy(&self) -> &PolicyVector {
        &self.policy
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// Advance one step and return what was observed during it.
    pub fn step(&mut self) -> Result<StepRecord> {
        let cfg = self.cfg;
        let t = self.t;
        let scale = exogenous_demand(t, &cfg.demand, &mut self.shocks);
        let adapts = cfg.regime.adapts_agents();
        let mut changed = false;

        if t == 0 {
            for a in &mut self.agents {
                let x = a.theta * scale;
                a.action = if adapts { x.clamp(0.0, cfg.behavior.x_max) } else { x };
            }
            changed = true;
        } else if adapts {
            behavior::belief_update(&mut self.belief, &self.prev_policy, cfg.behavior.belief_smoothing)?;
            let anticipated = behavior::anticipated_policy(&self.belief, cfg.behavior.lookahead);
            let price = cfg.price_rule.effective_price(&anticipated);
            let params = AdaptiveParams {
                relax: cfg.behavior.relax,
                x_max: cfg.behavior.x_max,
            };
            for (a, &node) in self.agents.iter_mut().zip(&self.topology.assignment) {
                let x = behavior::adaptive_update(a, a.theta * scale, price, self.congestion[node], params);
                changed |= x != a.action;
                a.action = x;
            }
        } else {
            for a in &mut self.agents {
                let x = behavior::static_action(a) * scale;
                changed |= x != a.action;
                a.action = x;
            }
        }

        let actions: Vec<f64> = self.agents.iter().map(|a| a.action).collect();
        let mut loads = environment::compute_loads_scaled(&self.topology, &actions, cfg.capacity_scale(t));
        if !loads.aggregate.is_finite() {
            return Err(Error::NumericOverflow { step: t });
        }
        let threshold = cfg
            .price_rule
            .threshold
            .map_or(cfg.congestion.threshold, |k| self.policy.coordinates()[k].value);
        loads.congestion = environment::congestion_signal(&loads, threshold, cfg.congestion.gain);
        let overload = environment::overload_metric(&loads);
        if self.recent_aggregate.len() == cfg.volatility_window {
            self.recent_aggregate.pop_front();
        }
        self.recent_aggregate.push_back(loads.aggregate);
        let vol = sample_sd(self.recent_aggregate.iter());
        let phi_t = phi(loads.aggregate, overload, vol, &cfg.weights);
        if !phi_t.is_finite() {
            return Err(Error::NumericOverflow { step: t });
        }
        let window = cfg.search.window.max(1);
        if self.recent_phi.len() == window {
            self.recent_phi.pop_front();
        }
        self.recent_phi.push_back(phi_t);

        let policy_now = self.policy.values();
        if cfg.policy_search_active() {
            let j_hat = self.recent_phi.iter().sum::<f64>() / self.recent_phi.len() as f64;
            self.policy = control::online_policy_step(&self.policy, &mut self.search, j_hat, t, &cfg.search);
        }
        self.prev_policy = policy_now.clone();
        self.congestion = loads.congestion;
        self.t += 1;
        Ok(StepRecord {
            t,
            aggregate: loads.aggregate,
            overload,
            volatility: vol,
            phi: phi_t,
            policy: policy_now,
            loads: loads.loads,
            actions_changed: changed,
        })
    }

    /// Run to the horizon.
    pub fn run(mut self) -> Result<RunRecord> {
        let cfg = self.cfg;
        let horizon = cfg.horizon;
        let mut rec = RunRecord {
            policy_names: cfg.policy.names().into_iter().map(String::from).collect(),
            aggregate: Vec::with_capacity(horizon),
            overload: Vec::with_capacity(horizon),
            volatility: Vec::with_capacity(horizon),
            phi: Vec::with_capacity(horizon),
            policy: Vec::with_capacity(horizon),
            node_loads: cfg.record_node_loads.then(Vec::new),
            j: 0.0,
            seed: self.seed,
            config_hash: cfg.fingerprint.clone(),
            regime: cfg.regime,
            burn_in: cfg.burn_in,
            window: cfg.window,
        };
        while self.t < horizon {
            let s = self.step()?;
            rec.aggregate.push(s.aggregate);
            rec.overload.push(s.overload);
            rec.volatility.push(s.volatility);
            rec.phi.push(s.phi);
            rec.policy.push(s.policy);
            if let Some(nl) = rec.node_loads.as_mut() {
                nl.push(s.loads);
            }
        }
        rec.j = evaluate_j(&rec.phi, cfg.window)?;
        Ok(rec)
    }
}

/// Run a single simulation with an explicit seed.
pub fn run_once(cfg: &SimConfig, seed: u64) -> Result<RunRecord> {
    Simulation::new(cfg, seed)?.run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub records: Vec<RunRecord>,
    pub mean_j: f64,
    /// Unbiased sample variance of J; 0 for a single replication.
    pub var_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    #[serde(rename = "mean_J")]
    pub mean_j: f64,
    #[serde(rename = "var_J")]
    pub var_j: f64,
    pub per_rep: Vec<RunSummary>,
}

impl Batch {
    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            mean_j: self.mean_j,
            var_j: self.var_j,
            per_rep: self.records.iter().map(RunRecord::summary).collect(),
        }
    }
}

/// `R` replications with seeds split from the master seed, run in parallel
/// and returned in replication order.
pub fn replicate(cfg: &SimConfig, replications: usize) -> Result<Batch> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    cfg.validate()?;
    let records: Vec<RunRecord> = (0..replications)
        .into_par_iter()
        .map(|r| {
            run_once(cfg, replication_seed(cfg.master_seed, r)).map_err(|e| Error::Replication {
                replication: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let js: Vec<f64> = records.iter().map(|r| r.j).collect();
    let mean_j = mean(&js);
    let var_j = if js.len() < 2 {
        0.0
    } else {
        js.iter().map(|j| (j - mean_j).powi(2)).sum::<f64>() / (js.len() - 1) as f64
    };
    Ok(Batch { records, mean_j, var_j })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::PolicyCoordinate;
    use crate::population::PriorDistribution;

    pub(crate) fn one_agent_config(regime: Regime) -> SimConfig {
        SimConfig {
            scenario: ScenarioKind::Emissions,
            horizon: 10,
            window: 5,
            burn_in: 2,
            regime,
            policy: PolicyVector::new(vec![PolicyCoordinate {
                name: "lambda".into(),
                value: 2.0,
                lower: 0.0,
                upper: 5.0,
                step: 0.5,
            }])
            .unwrap(),
            price_rule: PriceRule {
                price: 0,
                offset: None,
                threshold: None,
            },
            weights: PhiWeights {
                alpha: 1.0,
                beta: 1.0,
                gamma: 0.0,
            },
            congestion: CongestionParams {
                threshold: 0.9,
                gain: 0.0,
            },
            behavior: BehaviorParams {
                relax: 0.0,
                belief_smoothing: 1.0,
                lookahead: 0,
                x_max: 100.0,
            },
            demand: DemandPattern::default(),
            capacity_schedule: vec![],
            volatility_window: DEFAULT_VOLATILITY_WINDOW,
            search: SearchParams::default(),
            population: PopulationSource::Priors {
                n: 1,
                priors: vec![
                    AttributePrior::new("theta", PriorDistribution::Uniform { low: 10.0, high: 10.0 }),
                    AttributePrior::new("eta", PriorDistribution::Uniform { low: 1.0, high: 1.0 }),
                ],
            },
            topology: TopologySpec {
                nodes: vec![Node {
                    id: "cap".into(),
                    capacity: 100.0,
                    sector: None,
                }],
                edges: vec![],
                assignment: AssignmentRule::RoundRobin,
            },
            intervention: None,
            replications: 1,
            master_seed: 1,
            record_node_loads: false,
            fingerprint: "test".into(),
        }
    }

    #[test]
    fn phi_examples() {
        let w = |a, b, g| PhiWeights {
            alpha: a,
            beta: b,
            gamma: g,
        };
        assert_eq!(phi(10.0, 3.0, 4.0, &w(1.0, 0.0, 0.0)), -10.0);
        assert_eq!(phi(10.0, 3.0, 4.0, &w(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(phi(5.0, 0.5, 2.0, &w(1.0, 1.0, 1.0)), -7.5);
    }

    #[test]
    fn j_examples() {
        assert_eq!(evaluate_j(&[-3.0; 6], 4).unwrap(), -3.0);
        assert_eq!(evaluate_j(&[-1.0, -2.0, -3.0, -4.0], 2).unwrap(), -3.5);
        assert_eq!(evaluate_j(&[-1.0, -2.0, -3.0, -4.0], 4).unwrap(), -2.5);
        assert_eq!(evaluate_j(&[-1.0], 2).unwrap_err().name(), "WindowTooLong");
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(volatility(&[3.0; 10], 5), 0.0);
        assert!((volatility(&[0.0, 2.0], 2) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(volatility(&[7.0], 20), 0.0);
        let alt: Vec<f64> = (0..41).map(|t| if t % 2 == 0 { 0.0 } else { 2.0 }).collect();
        // last four values: two 0s and two 2s, mean 1, Σ(x−1)² = 4, /3
        assert!((volatility(&alt, 4) - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linear_descent_and_clamp() {
        let rec = run_once(&one_agent_config(Regime::Cpva), 3).unwrap();
        assert_eq!(rec.aggregate, vec![10.0, 8.0, 6.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_agents_hold_baseline() {
        let rec = run_once(&one_agent_config(Regime::Cpca), 3).unwrap();
        assert!(rec.aggregate.iter().all(|x| *x == 10.0));
        assert!(rec.phi[1..].iter().all(|p| *p == rec.phi[1]));
    }

    #[test]
    fn j_matches_phi_window() {
        let rec = run_once(&one_agent_config(Regime::Cpva), 3).unwrap();
        assert!((rec.j - evaluate_j(&rec.phi, rec.window).unwrap()).abs() <= 1e-12);
        assert_eq!(rec.len(), 10);
        assert_eq!(rec.policy.len(), 10);
    }

    #[test]
    fn replicate_single_has_zero_variance() {
        let b = replicate(&one_agent_config(Regime::Cpva), 1).unwrap();
        assert_eq!(b.var_j, 0.0);
        let b = replicate(&one_agent_config(Regime::Cpva), 4).unwrap();
        assert_eq!(b.records.len(), 4);
        assert_eq!(b.var_j, 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = one_agent_config(Regime::Cpca);
        c.window = 11;
        assert!(c.validate().is_err());
        let mut c = one_agent_config(Regime::Cpca);
        c.weights.alpha = -1.0;
        assert!(c.validate().is_err());
        let mut c = one_agent_config(Regime::Cpca);
        c.behavior.relax = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let mut c = one_agent_config(Regime::Cpca);
        c.population = PopulationSource::Priors {
            n: 2,
            priors: vec![
                AttributePrior::new(
                    "theta",
                    PriorDistribution::Uniform {
                        low: f64::MAX,
                        high: f64::MAX,
                    },
                ),
                AttributePrior::new("eta", PriorDistribution::Uniform { low: 0.0, high: 0.0 }),
            ],
        };
        assert_eq!(run_once(&c, 1).unwrap_err().name(), "NumericOverflow");
    }

    #[test]
    fn csv_layout() {
        let rec = run_once(&one_agent_config(Regime::Cpva), 3).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash=test"));
        assert_eq!(lines.next().unwrap(), "t,aggregate,overload,volatility,phi,lambda");
        assert!(lines.next().unwrap().starts_with("0,10,0,0,"));
        assert!(!text.contains('\r'));
    }
}
