//! Grid and Latin hypercube designs over box-shaped parameter spaces.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, streams};
use crate::{Error, Result};

pub const DEFAULT_GRID_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignMethod {
    /// Cartesian product of `levels` evenly spaced values per parameter.
    Grid { levels: usize },
    /// `points` samples, one per stratum in every dimension.
    Lhs { points: usize, seed: u64 },
}

/// Sample points from `ranges` (one `(low, high)` per parameter).
///
/// Grid points are ordered lexicographically with the first parameter
/// varying slowest. With no parameters the design is a single empty point.
pub fn sample_design(ranges: &[(f64, f64)], method: &DesignMethod, cap: usize) -> Result<Vec<Vec<f64>>> {
    for (i, (lo, hi)) in ranges.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameter {i}: need finite low < high, got [{lo}, {hi}]"
            )));
        }
    }
    if ranges.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    match *method {
        DesignMethod::Grid { levels } => grid(ranges, levels, cap),
        DesignMethod::Lhs { points, seed } => lhs(ranges, points, seed),
    }
}

fn grid(ranges: &[(f64, f64)], levels: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("grid needs at least one level".into()));
    }
    let total = (levels as u128).checked_pow(ranges.len() as u32).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::TooManyPoints {
            points: usize::try_from(total).unwrap_or(usize::MAX),
            cap,
        });
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if levels == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..levels)
            .map(|k| lo + (hi - lo) * k as f64 / (levels - 1) as f64)
            .collect()
    };
    let axes: Vec<Vec<f64>> = ranges.iter().map(|r| axis(*r)).collect();
    let mut points = vec![Vec::with_capacity(ranges.len())];
    for values in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn lhs(ranges: &[(f64, f64)], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("LHS needs at least one point".into()));
    }
    let mut rng = stream_rng(seed, streams::SAMPLING);
    let mut points = vec![Vec::with_capacity(ranges.len()); n];
    for (lo, hi) in ranges {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (point, stratum) in points.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            point.push(lo + (hi - lo) * (stratum as f64 + u) / n as f64);
        }
    }
    Ok(points)
}
