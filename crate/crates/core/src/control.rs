//! Policy vectors, co-adaptation regimes, policy search and the causal graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_EPOCH: usize = 50;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_STEP_DECAY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCoordinate {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

/// Named, bounded control coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVector {
    coords: Vec<PolicyCoordinate>,
}

impl PolicyVector {
    pub fn new(coords: Vec<PolicyCoordinate>) -> Result<Self> {
        for (k, c) in coords.iter().enumerate() {
            let path = format!("policy.{}", c.name);
            if coords[..k].iter().any(|o| o.name == c.name) {
                return Err(Error::schema(path, "duplicate coordinate name"));
            }
            if !(c.lower <= c.upper) {
                return Err(Error::schema(path, "lower bound exceeds upper bound"));
            }
            if !(c.step > 0.0 && c.step.is_finite()) {
                return Err(Error::schema(path, "step must be > 0"));
            }
            check_bounds(c, c.value)?;
        }
        Ok(Self { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coordinates(&self) -> &[PolicyCoordinate] {
        &self.coords
    }

    pub fn values(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.value).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.coords.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|k| self.coords[k].value)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let k = self
            .index_of(name)
            .ok_or_else(|| Error::schema(format!("policy.{name}"), "no such policy coordinate"))?;
        check_bounds(&self.coords[k], value)?;
        self.coords[k].value = value;
        Ok(())
    }

    /// Copy with the given values, clamped into bounds.
    pub fn with_values_clamped(&self, values: &[f64]) -> Self {
        let mut out = self.clone();
        for (c, v) in out.coords.iter_mut().zip(values) {
            c.value = v.clamp(c.lower, c.upper);
        }
        out
    }

    pub fn within_bounds(&self) -> bool {
        self.coords.iter().all(|c| c.lower <= c.value && c.value <= c.upper)
    }
}

fn check_bounds(c: &PolicyCoordinate, value: f64) -> Result<()> {
    if value.is_nan() || value < c.lower || value > c.upper {
        return Err(Error::OutOfBounds {
            name: c.name.clone(),
            value,
            lower: c.lower,
            upper: c.upper,
        });
    }
    Ok(())
}

/// Constant/Variable Policy × Constant/Variable Agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Regime {
    Cpca,
    Cpva,
    Vpca,
    Vpva,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Cpca, Regime::Cpva, Regime::Vpca, Regime::Vpva];

    /// Whether the policy rule G runs.
    pub fn varies_policy(self) -> bool {
        matches!(self, Regime::Vpca | Regime::Vpva)
    }

    /// Whether agents follow their learning rule.
    pub fn adapts_agents(self) -> bool {
        matches!(self, Regime::Cpva | Regime::Vpva)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Cpca => "CPCA",
            Regime::Cpva => "CPVA",
            Regime::Vpca => "VPCA",
            Regime::Vpva => "VPVA",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CPCA" => Ok(Regime::Cpca),
            "CPVA" => Ok(Regime::Cpva),
            "VPCA" => Ok(Regime::Vpca),
            "VPVA" => Ok(Regime::Vpva),
            _ => Err(Error::schema("regime", format!("unknown regime '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Steps per epoch Δ.
    pub epoch_length: usize,
    /// Minimum improvement of Ĵ for a probe to be kept.
    pub tolerance: f64,
    /// Number of trailing Φ values averaged into Ĵ.
    pub window: usize,
    /// Step multiplier applied after a full round of rejected probes.
    pub step_decay: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            epoch_length: DEFAULT_EPOCH,
            tolerance: DEFAULT_TOLERANCE,
            window: DEFAULT_EPOCH,
            step_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Probe {
    coordinate: usize,
    previous: f64,
}

/// Online search state, confined to one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub epoch: usize,
    pub coordinate: usize,
    /// +1 or −1 per coordinate; flipped whenever a probe is reverted.
    pub directions: Vec<f64>,
    pub accepted_j: Option<f64>,
    pub step_scale: f64,
    pub rejections_in_row: usize,
    pending: Option<Probe>,
}

impl SearchState {
    pub fn new(dimension: usize) -> Self {
        Self {
            epoch: 0,
            coordinate: 0,
            directions: vec![1.0; dimension],
            accepted_j: None,
            step_scale: 1.0,
            rejections_in_row: 0,
            pending: None,
        }
    }
}

/// One call of the online policy rule G at step `t` (0-based, called after
/// Φ_t is known).
///
/// Only acts at the end of an epoch (`(t + 1) % Δ == 0`). The first boundary
/// records the baseline Ĵ. Later boundaries keep the pending single-coordinate
/// probe if Ĵ beat the last accepted value by more than the tolerance and
/// revert it otherwise, then issue the next probe on the next coordinate.
/// An infinite tolerance can never accept, so no probe is issued at all.
pub fn online_policy_step(
    policy: &PolicyVector,
    state: &mut SearchState,
    j_hat: f64,
    t: usize,
    params: &SearchParams,
) -> PolicyVector {
    let mut next = policy.clone();
    if params.epoch_length == 0 || !(t + 1).is_multiple_of(params.epoch_length) || policy.is_empty() {
        return next;
    }
    if params.tolerance.is_infinite() {
        return next;
    }
    state.epoch += 1;
    let d = policy.len();
    match (state.pending.take(), state.accepted_j) {
        (Some(probe), Some(best)) => {
            if j_hat > best + params.tolerance {
                state.accepted_j = Some(j_hat);
                state.rejections_in_row = 0;
            } else {
                next.coords[probe.coordinate].value = probe.previous;
                state.directions[probe.coordinate] *= -1.0;
                state.rejections_in_row += 1;
                if state.rejections_in_row >= 2 * d {
                    state.step_scale *= params.step_decay;
                    state.rejections_in_row = 0;
                }
            }
            state.coordinate = (probe.coordinate + 1) % d;
        }
        _ => state.accepted_j = Some(j_hat),
    }
    let k = state.coordinate;
    let c = &mut next.coords[k];
    let previous = c.value;
    c.value = (c.value + state.directions[k] * c.step * state.step_scale).clamp(c.lower, c.upper);
    state.pending = Some(Probe {
        coordinate: k,
        previous,
    });
    next
}

/// Evaluation of one policy point: mean and variance of J over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub point: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub step_scale: f64,
    /// True when this evaluation became the incumbent.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillClimbResult {
    pub best: PolicyVector,
    pub best_j: f64,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    /// Step multiplier of the last neighbourhood evaluated (relative to each
    /// coordinate's initial step).
    pub final_scale: f64,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillClimbParams {
    pub tolerance: f64,
    pub max_evals: usize,
    pub step_decay: f64,
    /// Stop once every step is below this fraction of its initial value.
    pub min_step_fraction: f64,
}

impl Default for HillClimbParams {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_evals: 1000,
            step_decay: DEFAULT_STEP_DECAY,
            min_step_fraction: 1e-3,
        }
    }
}

/// Offline axis-neighbour hill climbing over a noisy black-box evaluator.
///
/// At each iteration the 2d neighbours `P ± step_k e_k` of the incumbent are
/// evaluated (concurrently; order of results is fixed). The best neighbour
/// replaces the incumbent if its mean beats it by more than the tolerance,
/// ties going to the first-listed neighbour. Otherwise all steps are scaled
/// by `step_decay`, until they fall under `min_step_fraction` of the
/// initial steps.
pub fn hill_climb_offline<F>(evaluator: F, start: &PolicyVector, params: &HillClimbParams) -> Result<HillClimbResult>
where
    F: Fn(&PolicyVector) -> Result<Evaluation> + Sync,
{
    if params.max_evals == 0 {
        return Err(Error::InvalidArgument("max_evals must be >= 1".into()));
    }
    if !(params.step_decay > 0.0 && params.step_decay < 1.0) {
        return Err(Error::InvalidArgument("step_decay must lie in (0, 1)".into()));
    }
    let mut trace = Vec::new();
    let mut incumbent = start.clone();
    let first = evaluator(&incumbent)?;
    let mut best_j = first.mean;
    trace.push(TraceEntry {
        point: incumbent.values(),
        mean: first.mean,
        variance: first.variance,
        step_scale: 1.0,
        accepted: true,
    });
    let mut evals = 1;
    let mut scale = 1.0;
    let mut last_scale = 1.0;
    let mut exhausted = false;
    while scale >= params.min_step_fraction {
        last_scale = scale;
        let mut neighbours = Vec::with_capacity(2 * incumbent.len());
        for k in 0..incumbent.len() {
            for sign in [1.0, -1.0] {
                let mut v = incumbent.values();
                v[k] += sign * incumbent.coords[k].step * scale;
                neighbours.push(incumbent.with_values_clamped(&v));
            }
        }
        let budget = params.max_evals - evals;
        if neighbours.len() > budget {
            neighbours.truncate(budget);
            exhausted = true;
        }
        let results: Vec<Evaluation> = neighbours.par_iter().map(&evaluator).collect::<Result<_>>()?;
        evals += results.len();
        let mut pick: Option<usize> = None;
        for (i, r) in results.iter().enumerate() {
            if pick.is_none_or(|b| r.mean > results[b].mean) {
                pick = Some(i);
            }
        }
        let accepted = pick.filter(|&i| results[i].mean > best_j + params.tolerance);
        for (i, (p, r)) in neighbours.iter().zip(&results).enumerate() {
            trace.push(TraceEntry {
                point: p.values(),
                mean: r.mean,
                variance: r.variance,
                step_scale: scale,
                accepted: Some(i) == accepted,
            });
        }
        match accepted {
            Some(i) => {
                incumbent = neighbours.swap_remove(i);
                best_j = results[i].mean;
            }
            None if !exhausted => scale *= params.step_decay,
            None => {}
        }
        if exhausted {
            log::warn!("hill climb budget of {} evaluations exhausted", params.max_evals);
            break;
        }
    }
    Ok(HillClimbResult {
        best: incumbent,
        best_j,
        trace,
        evaluations: evals,
        final_scale: last_scale,
        budget_exhausted: exhausted,
    })
}

/// Edge of the causal graph. `lagged` edges point into the next time slice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScmEdge {
    pub from: String,
    pub to: String,
    pub lagged: bool,
}

impl ScmEdge {
    pub fn now(from: &str, to: &str) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            lagged: false,
        }
    }

    pub fn next(from: &str, to: &str) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            lagged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScmGraph {
    pub variables: Vec<String>,
    pub edges: Vec<ScmEdge>,
    pub policy_var: String,
    pub state_var: String,
    /// Pinned policy under `do(P = p)`.
    pub intervention: Option<PolicyVector>,
}

impl ScmGraph {
    pub fn has_feedback(&self) -> bool {
        self.edges.contains(&ScmEdge::next(&self.state_var, &self.policy_var))
    }
}

/// `do(P = p)`: pin the policy and cut the state → next-policy feedback.
pub fn apply_intervention(scm: &ScmGraph, p: PolicyVector) -> Result<ScmGraph> {
    for c in p.coordinates() {
        check_bounds(c, c.value)?;
    }
    let mut out = scm.clone();
    out.edges
        .retain(|e| !(e.lagged && e.from == scm.state_var && e.to == scm.policy_var));
    out.intervention = Some(p);
    Ok(out)
}

/// Every edge endpoint declared and the within-slice edges acyclic.
pub fn validate_scm(scm: &ScmGraph) -> Result<()> {
    let index: BTreeMap<&str, usize> = scm.variables.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    for e in &scm.edges {
        for v in [&e.from, &e.to] {
            if !index.contains_key(v.as_str()) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
    }
    let n = scm.variables.len();
    let mut adj = vec![Vec::new(); n];
    for e in scm.edges.iter().filter(|e| !e.lagged) {
        adj[index[e.from.as_str()]].push(index[e.to.as_str()]);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; n];
    let mut stack: Vec<usize> = Vec::new();
    fn visit(u: usize, adj: &[Vec<usize>], mark: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        mark[u] = 1;
        stack.push(u);
        for &v in &adj[u] {
            if mark[v] == 1 {
                let start = stack.iter().position(|&w| w == v).unwrap_or(0);
                let mut cycle = stack[start..].to_vec();
                cycle.push(v);
                return Some(cycle);
            }
            if mark[v] == 0 {
                if let Some(c) = visit(v, adj, mark, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        mark[u] = 2;
        None
    }
    for u in 0..n {
        if mark[u] == 0 {
            if let Some(cycle) = visit(u, &adj, &mut mark, &mut stack) {
                return Err(Error::CycleDetected(
                    cycle.into_iter().map(|i| scm.variables[i].clone()).collect(),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn coord(name: &str, value: f64, lower: f64, upper: f64, step: f64) -> PolicyCoordinate {
        PolicyCoordinate {
            name: name.into(),
            value,
            lower,
            upper,
            step,
        }
    }

    fn two_d() -> PolicyVector {
        PolicyVector::new(vec![
            coord("lambda", 1.0, 0.0, 3.0, 0.5),
            coord("tau", 0.5, 0.0, 1.0, 0.25),
        ])
        .unwrap()
    }

    #[test]
    fn policy_vector_validation() {
        assert!(PolicyVector::new(vec![coord("a", 2.0, 0.0, 1.0, 0.1)]).is_err());
        assert!(PolicyVector::new(vec![coord("a", 0.5, 0.0, 1.0, 0.0)]).is_err());
        assert!(PolicyVector::new(vec![coord("a", 0.5, 0.0, 1.0, 0.1), coord("a", 0.5, 0.0, 1.0, 0.1)]).is_err());
        let mut p = two_d();
        assert_eq!(p.set("lambda", 9.0).unwrap_err().name(), "OutOfBounds");
        p.set("lambda", 2.0).unwrap();
        assert_eq!(p.get("lambda"), Some(2.0));
    }

    #[test]
    fn regime_switches() {
        let table: Vec<(bool, bool)> = Regime::ALL
            .iter()
            .map(|r| (r.varies_policy(), r.adapts_agents()))
            .collect();
        assert_eq!(table, vec![(false, false), (false, true), (true, false), (true, true)]);
        assert_eq!("vpva".parse::<Regime>().unwrap(), Regime::Vpva);
        assert_eq!("XPVA".parse::<Regime>().unwrap_err().name(), "SchemaError");
    }

    fn run_online(j_stream: &[f64], params: &SearchParams) -> Vec<Vec<f64>> {
        // One Ĵ per epoch boundary; returns the policy after each boundary.
        let mut p = two_d();
        let mut st = SearchState::new(p.len());
        let mut out = Vec::new();
        for (e, j) in j_stream.iter().enumerate() {
            let t = (e + 1) * params.epoch_length - 1;
            // off-boundary calls never change anything
            assert_eq!(online_policy_step(&p, &mut st.clone(), *j, t - 1, params), p);
            p = online_policy_step(&p, &mut st, *j, t, params);
            assert!(p.within_bounds());
            out.push(p.values());
        }
        out
    }

    #[test]
    fn improving_probes_walk_to_upper_bounds() {
        let params = SearchParams {
            epoch_length: 10,
            ..Default::default()
        };
        let js: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let path = run_online(&js, &params);
        for w in path.windows(2) {
            assert!(w[1][0] >= w[0][0] && w[1][1] >= w[0][1]);
        }
        assert_eq!(path.last().unwrap(), &vec![3.0, 1.0]);
    }

    #[test]
    fn constant_j_reverts_every_probe() {
        let params = SearchParams {
            epoch_length: 5,
            ..Default::default()
        };
        let p0 = two_d().values();
        let mut p = two_d();
        let mut st = SearchState::new(2);
        for e in 0..10 {
            let t = (e + 1) * 5 - 1;
            p = online_policy_step(&p, &mut st, -2.0, t, &params);
            // exactly one coordinate differs from P_0 (the fresh probe)
            let moved = p.values().iter().zip(&p0).filter(|(a, b)| a != b).count();
            assert!(moved <= 1);
            // reverting the probe restores P_0
            if let Some(pr) = st.pending {
                let mut back = p.values();
                back[pr.coordinate] = pr.previous;
                assert_eq!(back, p0);
            }
        }
    }

    #[test]
    fn infinite_tolerance_never_moves() {
        let params = SearchParams {
            epoch_length: 3,
            tolerance: f64::INFINITY,
            ..Default::default()
        };
        let path = run_online(&[1.0, 2.0, 3.0, 4.0], &params);
        assert!(path.iter().all(|v| *v == two_d().values()));
    }

    fn quadratic(target: [f64; 2]) -> impl Fn(&PolicyVector) -> Result<Evaluation> + Sync {
        move |p: &PolicyVector| {
            let v = p.values();
            Ok(Evaluation {
                mean: -((v[0] - target[0]).powi(2) + (v[1] - target[1]).powi(2)),
                variance: 0.0,
            })
        }
    }

    fn origin() -> PolicyVector {
        PolicyVector::new(vec![
            coord("a", 0.0, -10.0, 10.0, 1.0),
            coord("b", 0.0, -10.0, 10.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn hill_climb_reaches_lattice_optimum() {
        let res = hill_climb_offline(quadratic([2.0, 3.0]), &origin(), &HillClimbParams::default()).unwrap();
        assert_eq!(res.best.values(), vec![2.0, 3.0]);
        assert!(!res.budget_exhausted);
        let accepted: Vec<f64> = res.trace.iter().filter(|e| e.accepted).map(|e| e.mean).collect();
        assert!(accepted.windows(2).all(|w| w[1] > w[0] + 1e-6));
    }

    #[test]
    fn local_max_only_decays() {
        let start = PolicyVector::new(vec![
            coord("a", 2.0, -10.0, 10.0, 1.0),
            coord("b", 3.0, -10.0, 10.0, 1.0),
        ])
        .unwrap();
        let res = hill_climb_offline(quadratic([2.0, 3.0]), &start, &HillClimbParams::default()).unwrap();
        assert_eq!(res.best.values(), vec![2.0, 3.0]);
        assert_eq!(res.trace.iter().filter(|e| e.accepted).count(), 1);
        // 1 + 4 evaluations per step level, 10 halvings from 1 to below 1e-3
        assert_eq!(res.evaluations, 1 + 4 * 10);
        assert_eq!(res.final_scale, 0.5f64.powi(9));
        let first_level = res.trace.iter().filter(|e| e.step_scale == 1.0).count();
        assert_eq!(first_level, 1 + 4);
    }

    #[test]
    fn flat_objective_never_moves() {
        let flat = |_: &PolicyVector| {
            Ok(Evaluation {
                mean: 1.0,
                variance: 0.0,
            })
        };
        let res = hill_climb_offline(flat, &origin(), &HillClimbParams::default()).unwrap();
        assert_eq!(res.best, origin());
        assert!(res.trace.iter().all(|e| e.mean == 1.0));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let params = HillClimbParams {
            max_evals: 7,
            ..Default::default()
        };
        let res = hill_climb_offline(quadratic([5.0, 5.0]), &origin(), &params).unwrap();
        assert!(res.budget_exhausted);
        assert_eq!(res.evaluations, 7);
    }

    pub(crate) fn emissions_graph(feedback: bool) -> ScmGraph {
        let mut edges = vec![
            ScmEdge::now("P_t", "E_t"),
            ScmEdge::now("Theta", "E_t"),
            ScmEdge::now("X_t", "E_t"),
            ScmEdge::now("E_t", "Y_t"),
        ];
        if feedback {
            edges.push(ScmEdge::next("E_t", "P_t"));
        }
        ScmGraph {
            variables: ["X_t", "Theta", "P_t", "E_t", "Y_t"].map(String::from).to_vec(),
            edges,
            policy_var: "P_t".into(),
            state_var: "E_t".into(),
            intervention: None,
        }
    }

    #[test]
    fn scm_validation() {
        validate_scm(&emissions_graph(true)).unwrap();
        let mut cyc = emissions_graph(false);
        cyc.edges.push(ScmEdge::now("Y_t", "P_t"));
        cyc.edges.push(ScmEdge::now("P_t", "Y_t"));
        match validate_scm(&cyc).unwrap_err() {
            Error::CycleDetected(path) => {
                assert_eq!(path.first(), path.last());
                assert!(path.contains(&"Y_t".to_string()));
            }
            e => panic!("unexpected {e}"),
        }
        let mut unknown = emissions_graph(false);
        unknown.edges.push(ScmEdge::now("Z", "E_t"));
        assert_eq!(validate_scm(&unknown).unwrap_err().name(), "UnknownVariable");
    }

    #[test]
    fn intervention_cuts_feedback() {
        let g = emissions_graph(true);
        assert!(g.has_feedback());
        let cut = apply_intervention(&g, two_d()).unwrap();
        assert!(!cut.has_feedback());
        assert_eq!(cut.edges.len(), g.edges.len() - 1);
        validate_scm(&cut).unwrap();
        // no feedback edge to begin with: only the pin changes
        let plain = emissions_graph(false);
        let pinned = apply_intervention(&plain, two_d()).unwrap();
        assert_eq!(pinned.edges, plain.edges);
    }
}
