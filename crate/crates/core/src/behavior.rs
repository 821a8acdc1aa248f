//! Agent decision rules and the policy belief layer.

use std::collections::VecDeque;

use crate::{Error, Result};

/// Minimum policy history kept by a belief, enough for the trend predicate.
pub const MIN_HISTORY: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub theta: f64,
    pub eta: f64,
    /// Current action x_i (load drawn or emissions produced per step).
    pub action: f64,
}

/// Static rule: the agent plays its baseline.
pub fn static_action(agent: &AgentState) -> f64 {
    agent.theta
}

/// Knobs of the adaptive rule shared by all agents of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    /// Relaxation ρ ∈ [0, 1] toward the baseline.
    pub relax: f64,
    pub x_max: f64,
}

/// `x' = clamp(x + ρ(target − x) − η(price + congestion), 0, x_max)`.
///
/// `target` is the agent's baseline scaled by the exogenous demand factor.
/// With ρ = 0 this is the plain price-response update.
pub fn adaptive_update(
    agent: &AgentState,
    target: f64,
    effective_price: f64,
    congestion: f64,
    params: AdaptiveParams,
) -> f64 {
    let x = agent.action;
    let next = x + params.relax * (target - x) - agent.eta * (effective_price + congestion);
    if next.is_nan() {
        return 0.0;
    }
    next.clamp(0.0, params.x_max)
}

/// Point estimate and slope summary of an agent's beliefs about the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub estimate: Vec<f64>,
    pub slope: Vec<f64>,
    pub history: VecDeque<Vec<f64>>,
    pub capacity: usize,
}

impl BeliefState {
    /// Belief anchored at `initial` with zero slope.
    pub fn new(initial: &[f64], capacity: usize) -> Self {
        let capacity = capacity.max(MIN_HISTORY);
        let mut history = VecDeque::with_capacity(capacity);
        history.push_back(initial.to_vec());
        Self {
            estimate: initial.to_vec(),
            slope: vec![0.0; initial.len()],
            history,
            capacity,
        }
    }
}

/// Exponential smoothing of the observed policy and of its per-step change.
pub fn belief_update(belief: &mut BeliefState, observed: &[f64], smoothing: f64) -> Result<()> {
    if observed.len() != belief.estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: belief.estimate.len(),
            got: observed.len(),
        });
    }
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "belief smoothing {smoothing} outside (0, 1]"
        )));
    }
    let prev = belief.history.back().cloned().unwrap_or_else(|| observed.to_vec());
    for k in 0..observed.len() {
        belief.estimate[k] = smoothing * observed[k] + (1.0 - smoothing) * belief.estimate[k];
        belief.slope[k] = smoothing * (observed[k] - prev[k]) + (1.0 - smoothing) * belief.slope[k];
    }
    if belief.history.len() == belief.capacity {
        belief.history.pop_front();
    }
    belief.history.push_back(observed.to_vec());
    Ok(())
}

/// Extrapolated policy `P̂ + ℓ·ĝ`, each coordinate floored at 0.
pub fn anticipated_policy(belief: &BeliefState, lookahead: usize) -> Vec<f64> {
    belief
        .estimate
        .iter()
        .zip(&belief.slope)
        .map(|(p, g)| (p + lookahead as f64 * g).max(0.0))
        .collect()
}

/// Anticipated value of one price coordinate.
pub fn anticipated_price(belief: &BeliefState, lookahead: usize, coordinate: usize) -> f64 {
    (belief.estimate[coordinate] + lookahead as f64 * belief.slope[coordinate]).max(0.0)
}

/// Least-squares slope of the last four values of `coordinate` exceeds `threshold`.
pub fn trend_predicate(history: &VecDeque<Vec<f64>>, coordinate: usize, threshold: f64) -> Result<bool> {
    if history.len() < MIN_HISTORY {
        return Err(Error::InsufficientHistory {
            needed: MIN_HISTORY,
            have: history.len(),
        });
    }
    let ys: Vec<f64> = history
        .iter()
        .skip(history.len() - MIN_HISTORY)
        .map(|p| p[coordinate])
        .collect();
    // x = 0..3, mean 1.5, Σ(x − x̄)² = 5
    let mean = ys.iter().sum::<f64>() / 4.0;
    let slope = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - 1.5) * (y - mean))
        .sum::<f64>()
        / 5.0;
    Ok(slope > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn agent(theta: f64, eta: f64, action: f64) -> AgentState {
        AgentState {
            id: 0,
            theta,
            eta,
            action,
        }
    }

    const NO_RELAX: AdaptiveParams = AdaptiveParams { relax: 0.0, x_max: 1e9 };

    #[test]
    fn static_is_baseline() {
        assert_eq!(static_action(&agent(0.0, 1.0, 3.0)), 0.0);
        let a = agent(5.0, 1.0, 3.0);
        assert_eq!(static_action(&a), 5.0);
        assert_eq!(static_action(&a), static_action(&a));
    }

    #[test]
    fn adaptive_examples() {
        assert_eq!(adaptive_update(&agent(3.0, 0.0, 7.0), 3.0, 4.0, 1.0, NO_RELAX), 7.0);
        assert_eq!(adaptive_update(&agent(10.0, 1.0, 10.0), 10.0, 1.5, 0.5, NO_RELAX), 8.0);
        assert_eq!(adaptive_update(&agent(1.0, 1.0, 1.0), 1.0, 5.0, 0.0, NO_RELAX), 0.0);
        let relax = AdaptiveParams { relax: 0.5, x_max: 1e9 };
        assert_eq!(adaptive_update(&agent(4.0, 1.0, 0.0), 4.0, 0.0, 0.0, relax), 2.0);
    }

    #[test]
    fn memoryless_belief() {
        let mut b = BeliefState::new(&[1.0, 2.0], 4);
        belief_update(&mut b, &[3.0, -1.0], 1.0).unwrap();
        assert_eq!(b.estimate, vec![3.0, -1.0]);
        assert_eq!(b.slope, vec![2.0, -3.0]);
    }

    #[test]
    fn belief_dimension_mismatch() {
        let mut b = BeliefState::new(&[1.0], 4);
        assert_eq!(
            belief_update(&mut b, &[1.0, 2.0], 0.5).unwrap_err().name(),
            "DimensionMismatch"
        );
    }

    #[test]
    fn constant_policy_slope_decays() {
        let mut b = BeliefState::new(&[0.0], 4);
        belief_update(&mut b, &[5.0], 0.3).unwrap();
        let mut last = b.slope[0].abs();
        assert!(last > 0.0);
        for _ in 0..50 {
            belief_update(&mut b, &[5.0], 0.3).unwrap();
            let now = b.slope[0].abs();
            assert!(now <= 0.7 * last + 1e-15);
            last = now;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn ramp_slope_matches_geometric_series() {
        // With P_t = t and the history anchored at P_0 = 0, every observed
        // increment is 1 except the first (0), so ĝ_t = 1 − (1 − β)^t.
        let beta: f64 = 0.5;
        let mut b = BeliefState::new(&[0.0, 0.0], 4);
        for t in 0..=10 {
            belief_update(&mut b, &[t as f64, 0.0], beta).unwrap();
            let oracle = 1.0 - (1.0 - beta).powi(t);
            assert!((b.slope[0] - oracle).abs() < 1e-12, "t={t}");
            assert_eq!(b.slope[1], 0.0);
        }
        assert!((b.slope[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn history_is_bounded() {
        let mut b = BeliefState::new(&[0.0], 4);
        for t in 0..10 {
            belief_update(&mut b, &[t as f64], 1.0).unwrap();
        }
        assert_eq!(b.history.len(), 4);
        assert_eq!(b.history.back().unwrap(), &vec![9.0]);
    }

    #[test]
    fn anticipated_price_examples() {
        let mut b = BeliefState::new(&[2.0], 4);
        assert_eq!(anticipated_price(&b, 3, 0), 2.0);
        b.slope = vec![0.5];
        assert_eq!(anticipated_price(&b, 2, 0), 3.0);
        b.estimate = vec![1.0];
        b.slope = vec![-1.0];
        assert_eq!(anticipated_price(&b, 3, 0), 0.0);
        assert_eq!(anticipated_policy(&b, 3), vec![0.0]);
    }

    fn hist(v: &[f64]) -> VecDeque<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn trend_examples() {
        assert!(trend_predicate(&hist(&[1.0, 2.0, 3.0, 4.0]), 0, 0.5).unwrap());
        assert!(!trend_predicate(&hist(&[2.0; 4]), 0, 0.0).unwrap());
        assert!(!trend_predicate(&hist(&[4.0, 3.0, 2.0, 1.0]), 0, 0.0).unwrap());
        assert!(trend_predicate(&hist(&[9.0, 1.0, 2.0, 3.0, 4.0]), 0, 0.9).unwrap());
        assert_eq!(
            trend_predicate(&hist(&[1.0, 2.0]), 0, 0.0).unwrap_err().name(),
            "InsufficientHistory"
        );
    }

    proptest! {
        #[test]
        fn update_is_clamped_and_monotone(
            theta in 0.0f64..20.0, eta in 0.0f64..3.0, x in 0.0f64..20.0,
            p in 0.0f64..5.0, dp in 0.0f64..5.0, c in 0.0f64..5.0, rho in 0.0f64..=1.0,
        ) {
            let params = AdaptiveParams { relax: rho, x_max: 15.0 };
            let a = agent(theta, eta, x);
            let lo = adaptive_update(&a, theta, p, c, params);
            prop_assert!((0.0..=15.0).contains(&lo));
            let hi = adaptive_update(&a, theta, p + dp, c, NO_RELAX);
            prop_assert!(hi <= adaptive_update(&a, theta, p, c, NO_RELAX));
        }

        #[test]
        fn smoothing_converges_geometrically(
            start in -10.0f64..10.0, target in -10.0f64..10.0, beta in 0.05f64..=1.0,
        ) {
            let mut b = BeliefState::new(&[start], 4);
            for t in 1..40 {
                belief_update(&mut b, &[target], beta).unwrap();
                let bound = (1.0 - beta).powi(t) * (start - target).abs();
                prop_assert!((b.estimate[0] - target).abs() <= bound + 1e-9);
            }
        }

        #[test]
        fn inert_agent_never_moves(theta in 0.0f64..10.0, p in 0.0f64..5.0, c in 0.0f64..5.0) {
            let mut a = agent(theta, 0.0, theta);
            for _ in 0..20 {
                a.action = adaptive_update(&a, theta * 1.3, p, c, NO_RELAX);
            }
            prop_assert_eq!(a.action, theta);
        }
    }
}
