//! Per-cluster summaries and advisory regime names.

use std::collections::BTreeMap;

use serde::Serialize;

use super::features::RunFeatures;
use crate::diagnostics::TrajectoryClass;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub mean_aggregate: f64,
    pub overload_freq: f64,
    pub h_mu: f64,
    #[serde(rename = "C_mu")]
    pub c_mu: f64,
    #[serde(rename = "E_pred")]
    pub e_pred: f64,
    pub cyclic_fraction: f64,
    /// Cross-tabulation against the configured regime of each run.
    pub regimes: BTreeMap<String, usize>,
    /// Cross-tabulation against the run labels.
    pub labels: BTreeMap<String, usize>,
    /// Heuristic names; suggestions only.
    pub suggested_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub clusters: Vec<ClusterSummary>,
}

fn argbest(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    (1..values.len()).fold(0, |b, i| if better(values[i], values[b]) { i } else { b })
}

/// Summarize clusters and suggest names. Ties go to the lowest index.
pub fn cluster_report(features: &[RunFeatures], labels: &[usize]) -> Result<ClusterReport> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut clusters = Vec::new();
    for c in 0..k {
        let members: Vec<&RunFeatures> = features
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == c)
            .map(|(f, _)| f)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let avg = |g: fn(&RunFeatures) -> f64| members.iter().map(|f| g(f)).sum::<f64>() / n;
        let mut regimes = BTreeMap::new();
        let mut tags = BTreeMap::new();
        for f in &members {
            *regimes.entry(f.regime.clone()).or_insert(0) += 1;
            *tags.entry(f.label.clone()).or_insert(0) += 1;
        }
        clusters.push(ClusterSummary {
            cluster: c,
            size: members.len(),
            mean_aggregate: avg(|f| f.mean_aggregate),
            overload_freq: avg(|f| f.overload_freq),
            h_mu: avg(|f| f.h_mu),
            c_mu: avg(|f| f.c_mu),
            e_pred: avg(|f| f.e_pred),
            cyclic_fraction: members
                .iter()
                .filter(|f| f.classification == Some(TrajectoryClass::Cyclic))
                .count() as f64
                / n,
            regimes,
            labels: tags,
            suggested_names: Vec::new(),
        });
    }
    if clusters.len() >= 2 {
        let overload: Vec<f64> = clusters.iter().map(|c| c.overload_freq).collect();
        let stable = (1..clusters.len()).fold(0, |b, i| {
            let key = |j: usize| (clusters[j].overload_freq, clusters[j].h_mu);
            let (x, y) = (key(i), key(b));
            if x.0 < y.0 || (x.0 == y.0 && x.1 < y.1) {
                i
            } else {
                b
            }
        });
        clusters[stable].suggested_names.push("stable".into());
        let over = argbest(&overload, |a, b| a > b);
        clusters[over].suggested_names.push("overloaded".into());
        let cmu: Vec<f64> = clusters.iter().map(|c| c.c_mu).collect();
        let crit = argbest(&cmu, |a, b| a > b);
        clusters[crit].suggested_names.push("near-critical".into());
        let cyc: Vec<f64> = clusters.iter().map(|c| c.cyclic_fraction).collect();
        let osc = argbest(&cyc, |a, b| a > b);
        if cyc[osc] > 0.0 {
            clusters[osc].suggested_names.push("oscillatory".into());
        }
    }
    Ok(ClusterReport { clusters })
}
