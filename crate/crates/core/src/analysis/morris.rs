//! Morris elementary-effects screening.
//!
//! Each trajectory starts on a `p`-level lattice in the unit cube and moves
//! one factor at a time by `Δ = p / (2(p − 1))`, in a random factor order.
//! Effects are reported in the original units of each parameter, so a
//! linear function recovers its coefficients exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use crate::rng::{stream_rng, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorrisEffect {
    pub param: String,
    pub mu: f64,
    pub mu_star: f64,
    pub sigma: f64,
    #[serde(skip)]
    pub effects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorrisResult {
    pub effects: Vec<MorrisEffect>,
    pub trajectories: usize,
    pub levels: usize,
    pub delta: f64,
}

impl MorrisResult {
    pub fn get(&self, name: &str) -> Option<&MorrisEffect> {
        self.effects.iter().find(|e| e.param == name)
    }

    pub fn max_mu_star(&self) -> f64 {
        self.effects.iter().map(|e| e.mu_star).fold(0.0, f64::max)
    }

    /// `param, mu, mu_star, sigma`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for e in &self.effects {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Trajectory {
    /// Lattice indices of the r·(k+1) points.
    points: Vec<Vec<usize>>,
    /// (factor, signed lattice step) per move.
    moves: Vec<(usize, f64)>,
}

fn build_trajectory<R: Rng>(k: usize, p: usize, rng: &mut R) -> Trajectory {
    let jump = p / 2;
    let mut x: Vec<usize> = (0..k).map(|_| rng.random_range(0..p)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut points = vec![x.clone()];
    let mut moves = Vec::with_capacity(k);
    for i in order {
        if x[i] < jump {
            x[i] += jump;
            moves.push((i, 1.0));
        } else {
            x[i] -= jump;
            moves.push((i, -1.0));
        }
        points.push(x.clone());
    }
    Trajectory { points, moves }
}

/// Screen `evaluator` over the box `space` (`(name, low, high)` per factor)
/// with `r` trajectories on a `p`-level lattice.
pub fn morris_screen<F>(
    evaluator: F,
    space: &[(String, f64, f64)],
    r: usize,
    p: usize,
    seed: u64,
) -> Result<MorrisResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if p < 4 || !p.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("levels must be even and >= 4, got {p}")));
    }
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trajectories, got {r}")));
    }
    if space.is_empty() {
        return Err(Error::InvalidArgument("no parameters to screen".into()));
    }
    for (name, lo, hi) in space {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("parameter {name}: need low < high")));
        }
    }
    let k = space.len();
    let delta = p as f64 / (2.0 * (p - 1) as f64);
    let mut rng = stream_rng(seed, streams::SAMPLING);
    let trajectories: Vec<Trajectory> = (0..r).map(|_| build_trajectory(k, p, &mut rng)).collect();
    let to_point = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .zip(space)
            .map(|(&i, (_, lo, hi))| lo + (hi - lo) * i as f64 / (p - 1) as f64)
            .collect()
    };

    let outputs: Vec<Vec<f64>> = trajectories
        .par_iter()
        .enumerate()
        .map(|(t, traj)| {
            traj.points
                .iter()
                .enumerate()
                .map(|(step, idx)| {
                    evaluator(&to_point(idx)).map_err(|e| Error::Evaluation {
                        trajectory: t,
                        step,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut per_factor: Vec<Vec<f64>> = vec![Vec::with_capacity(r); k];
    for (traj, ys) in trajectories.iter().zip(&outputs) {
        for (step, &(i, sign)) in traj.moves.iter().enumerate() {
            let (_, lo, hi) = &space[i];
            let ee = (ys[step + 1] - ys[step]) / (sign * delta * (hi - lo));
            per_factor[i].push(ee);
        }
    }
    let effects = space
        .iter()
        .zip(per_factor)
        .map(|((name, _, _), ee)| {
            let n = ee.len() as f64;
            let mu = ee.iter().sum::<f64>() / n;
            let mu_star = ee.iter().map(|e| e.abs()).sum::<f64>() / n;
            let sigma = (ee.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            MorrisEffect {
                param: name.clone(),
                mu,
                mu_star,
                sigma,
                effects: ee,
            }
        })
        .collect();
    Ok(MorrisResult {
        effects,
        trajectories: r,
        levels: p,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(names: &[&str]) -> Vec<(String, f64, f64)> {
        names.iter().map(|n| (n.to_string(), 0.0, 1.0)).collect()
    }

    #[test]
    fn linear_function_is_exact() {
        let res = morris_screen(|x| Ok(2.0 * x[0] + 0.0 * x[1]), &unit(&["a", "b"]), 7, 4, 1).unwrap();
        let a = res.get("a").unwrap();
        let b = res.get("b").unwrap();
        assert!((a.mu_star - 2.0).abs() < 1e-12 && a.sigma < 1e-12);
        assert!(b.mu_star.abs() < 1e-12 && b.sigma < 1e-12);
        assert!((res.delta - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn doubling_r_keeps_linear_mu_star() {
        let f = |x: &[f64]| Ok(-3.0 * x[0] + x[1]);
        let a = morris_screen(f, &unit(&["a", "b"]), 5, 6, 2).unwrap();
        let b = morris_screen(f, &unit(&["a", "b"]), 10, 6, 2).unwrap();
        for name in ["a", "b"] {
            assert!((a.get(name).unwrap().mu_star - b.get(name).unwrap().mu_star).abs() < 1e-12);
        }
        assert!((a.get("a").unwrap().mu + 3.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_spreads_effects() {
        // with p = 4 the lattice is {0, 1/3, 2/3, 1} and Δ = 2/3; the effect of
        // a in a·b is the current value of b, so it takes several values
        let res = morris_screen(|x| Ok(x[0] * x[1]), &unit(&["a", "b"]), 20, 4, 5).unwrap();
        let a = res.get("a").unwrap();
        assert!(a.sigma > 0.0);
        let lattice = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for e in &a.effects {
            assert!(lattice.iter().any(|b| (b - e).abs() < 1e-12));
        }
    }

    #[test]
    fn original_units() {
        let space = vec![("a".to_string(), 10.0, 20.0), ("b".to_string(), -1.0, 1.0)];
        let res = morris_screen(|x| Ok(0.5 * x[0] - 4.0 * x[1]), &space, 4, 4, 0).unwrap();
        assert!((res.get("a").unwrap().mu - 0.5).abs() < 1e-12);
        assert!((res.get("b").unwrap().mu + 4.0).abs() < 1e-12);
    }

    #[test]
    fn preconditions_and_errors() {
        let f = |_: &[f64]| Ok(0.0);
        assert!(morris_screen(f, &unit(&["a"]), 2, 5, 0).is_err());
        assert!(morris_screen(f, &unit(&["a"]), 1, 4, 0).is_err());
        let err = morris_screen(|_| Err(Error::InvalidArgument("boom".into())), &unit(&["a"]), 2, 4, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::Evaluation {
                trajectory: 0,
                step: 0,
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn linear_sigma_vanishes(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, seed in any::<u64>()) {
            let res = morris_screen(|x| Ok(c0 * x[0] + c1 * x[1]), &unit(&["a", "b"]), 4, 4, seed).unwrap();
            for (e, c) in res.effects.iter().zip([c0, c1]) {
                prop_assert!(e.sigma < 1e-9);
                prop_assert!(e.mu_star >= e.mu.abs() - 1e-12);
                prop_assert!((e.mu - e.mu_star * c.signum()).abs() < 1e-9);
            }
        }
    }
}
