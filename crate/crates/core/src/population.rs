//! Synthetic population synthesis.
//!
//! The pipeline is: fit seed weights to aggregate marginals with iterative
//! proportional fitting ([`ipf_fit`]), draw discrete agents from the fitted
//! weights ([`sample_population`]), fill missing continuous attributes from
//! donors in the same categorical cell ([`impute_missing`]) and finally draw
//! the behavioural attributes θ and η from priors
//! ([`draw_behavioral_attributes`]).

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::{label_stream, stream_rng, streams};
use crate::{Error, Result};

pub const DEFAULT_IPF_TOL: f64 = 1e-8;
pub const DEFAULT_IPF_MAX_ITER: usize = 1000;

/// Target counts for the categories of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalConstraint {
    pub dimension: String,
    pub categories: Vec<String>,
    pub targets: Vec<f64>,
}

impl MarginalConstraint {
    pub fn new(dimension: impl Into<String>, categories: Vec<String>, targets: Vec<f64>) -> Result<Self> {
        let dimension = dimension.into();
        if categories.len() != targets.len() {
            return Err(Error::schema(&dimension, "one target count per category is required"));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::schema(&dimension, format!("duplicate category '{c}'")));
            }
        }
        if targets.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::schema(&dimension, "target counts must be finite and >= 0"));
        }
        if !targets.iter().any(|t| *t > 0.0) {
            return Err(Error::schema(&dimension, "at least one target must be positive"));
        }
        Ok(Self {
            dimension,
            categories,
            targets,
        })
    }

    pub fn total(&self) -> f64 {
        self.targets.iter().sum()
    }

    fn index_of(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    /// One category per entry of [`SeedSample::dimensions`].
    pub categories: Vec<String>,
    /// One value per entry of [`SeedSample::attributes`]; `None` is missing.
    pub attributes: Vec<Option<f64>>,
}

/// Weighted microdata used as the IPF starting point and as the donor pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSample {
    pub dimensions: Vec<String>,
    pub attributes: Vec<String>,
    pub records: Vec<SeedRecord>,
    pub weights: Vec<f64>,
}

impl SeedSample {
    pub fn new(
        dimensions: Vec<String>,
        attributes: Vec<String>,
        records: Vec<SeedRecord>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if records.len() != weights.len() {
            return Err(Error::schema("weight", "one weight per record is required"));
        }
        if records.is_empty() {
            return Err(Error::schema("records", "seed sample is empty"));
        }
        for (i, (r, w)) in records.iter().zip(&weights).enumerate() {
            if r.categories.len() != dimensions.len() || r.attributes.len() != attributes.len() {
                return Err(Error::schema(format!("records[{i}]"), "wrong number of fields"));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::schema(format!("records[{i}].weight"), "weight must be >= 0"));
            }
        }
        Ok(Self {
            dimensions,
            attributes,
            records,
            weights,
        })
    }

    fn dimension_index(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorDistribution {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Normal with standard deviation `sd`, truncated to `[low, high]`.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        low: f64,
        high: f64,
    },
    Categorical {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePrior {
    pub attribute: String,
    #[serde(flatten)]
    pub distribution: PriorDistribution,
}

impl AttributePrior {
    pub fn new(attribute: impl Into<String>, distribution: PriorDistribution) -> Self {
        Self {
            attribute: attribute.into(),
            distribution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidPrior {
                attribute: self.attribute.clone(),
                reason: reason.to_string(),
            })
        };
        match &self.distribution {
            PriorDistribution::Uniform { low, high } => {
                // low == high is accepted as a point mass.
                if !low.is_finite() || !high.is_finite() || high < low {
                    return bad("uniform requires finite low <= high");
                }
            }
            PriorDistribution::TruncatedNormal { mean, sd, low, high } => {
                if !mean.is_finite() || !sd.is_finite() || *sd < 0.0 {
                    return bad("normal requires finite mean and sd >= 0");
                }
                if !low.is_finite() || !high.is_finite() || high < low {
                    return bad("truncation bounds require low <= high");
                }
                if *sd == 0.0 && (mean < low || mean > high) {
                    return bad("point mass lies outside the truncation bounds");
                }
            }
            PriorDistribution::Categorical { values, probabilities } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return bad("categorical requires one probability per value");
                }
                if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad("probabilities must be >= 0");
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("probabilities must sum to 1");
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.distribution {
            PriorDistribution::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..=*high)
                }
            }
            PriorDistribution::TruncatedNormal { mean, sd, low, high } => {
                let u: f64 = rng.random();
                truncated_normal_quantile(*mean, *sd, *low, *high, u)
            }
            PriorDistribution::Categorical { values, probabilities } => {
                let idx = WeightedIndex::new(probabilities).map(|d| d.sample(rng)).unwrap_or(0);
                values[idx]
            }
        }
    }
}

/// Inverse-CDF draw from a normal truncated to `[low, high]`.
fn truncated_normal_quantile(mean: f64, sd: f64, low: f64, high: f64, u: f64) -> f64 {
    if sd == 0.0 || low == high {
        return mean.clamp(low, high);
    }
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let a = (low - mean) / sd;
    let b = (high - mean) / sd;
    // Work in the lower tail, where the CDF keeps its precision.
    let (a, b, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
    let (fa, fb) = (std.cdf(a), std.cdf(b));
    let z = if fb - fa <= f64::MIN_POSITIVE {
        a
    } else {
        std.inverse_cdf(fa + u * (fb - fa)).clamp(a, b)
    };
    let z = if flip { -z } else { z };
    (mean + sd * z).clamp(low, high)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    /// Baseline action level θ_i.
    pub theta: f64,
    /// Responsiveness η_i.
    pub eta: f64,
    pub categories: Vec<String>,
    pub attributes: Vec<Option<f64>>,
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    pub dimensions: Vec<String>,
    pub attributes: Vec<String>,
    pub agents: Vec<Agent>,
}

impl SyntheticPopulation {
    /// Population of `n` agents with no categorical structure, θ and η unset.
    pub fn blank(n: usize) -> Self {
        Self {
            dimensions: Vec::new(),
            attributes: Vec::new(),
            agents: (0..n)
                .map(|id| Agent {
                    id,
                    theta: 0.0,
                    eta: 0.0,
                    categories: Vec::new(),
                    attributes: Vec::new(),
                    node: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpfFit {
    pub weights: Vec<f64>,
    pub sweeps: usize,
    /// Relative L∞ marginal residual after the last sweep.
    pub residual: f64,
    pub warnings: Vec<String>,
}

fn marginal_residual(weights: &[f64], cells: &[Vec<usize>], constraints: &[MarginalConstraint]) -> f64 {
    let mut worst: f64 = 0.0;
    for (d, con) in constraints.iter().enumerate() {
        let mut sums = vec![0.0; con.targets.len()];
        for (w, cell) in weights.iter().zip(cells) {
            sums[cell[d]] += w;
        }
        for (s, t) in sums.iter().zip(&con.targets) {
            let r = if *t > 0.0 { (s - t).abs() / t } else { s.abs() };
            worst = worst.max(r);
        }
    }
    worst
}

/// Iterative proportional fitting of seed weights to marginal targets.
///
/// Each sweep rescales the weights dimension by dimension so that the
/// weighted category sums of that dimension equal its targets. Records with
/// zero seed weight stay at zero. When the dimensions disagree on the total
/// count, every dimension is rescaled to the mean total first and a warning
/// is returned with the fit.
pub fn ipf_fit(seed: &SeedSample, constraints: &[MarginalConstraint], tol: f64, max_iter: usize) -> Result<IpfFit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("ipf tolerance must be > 0".into()));
    }
    if constraints.is_empty() {
        return Err(Error::InvalidArgument("at least one marginal is required".into()));
    }
    let mut warnings = Vec::new();
    let totals: Vec<f64> = constraints.iter().map(MarginalConstraint::total).collect();
    let mean_total = totals.iter().sum::<f64>() / totals.len() as f64;
    let consistent = totals.iter().all(|t| (t - mean_total).abs() <= 1e-6 * mean_total);
    let constraints: Vec<MarginalConstraint> = if consistent {
        constraints.to_vec()
    } else {
        let msg = format!("marginal totals disagree ({totals:?}); rescaled every dimension to {mean_total}");
        log::warn!("{msg}");
        warnings.push(msg);
        constraints
            .iter()
            .map(|c| {
                let k = mean_total / c.total();
                MarginalConstraint {
                    targets: c.targets.iter().map(|t| t * k).collect(),
                    ..c.clone()
                }
            })
            .collect()
    };

    // cells[r][d] = category index of record r in constraint d
    let mut dim_cols = Vec::with_capacity(constraints.len());
    for c in &constraints {
        dim_cols.push(
            seed.dimension_index(&c.dimension)
                .ok_or_else(|| Error::schema(&c.dimension, "dimension missing from seed sample"))?,
        );
    }
    let mut cells = Vec::with_capacity(seed.records.len());
    for rec in &seed.records {
        let mut cell = Vec::with_capacity(constraints.len());
        for (c, &col) in constraints.iter().zip(&dim_cols) {
            let cat = &rec.categories[col];
            cell.push(c.index_of(cat).ok_or_else(|| Error::UnknownCategory {
                dimension: c.dimension.clone(),
                category: cat.clone(),
            })?);
        }
        cells.push(cell);
    }

    for (d, c) in constraints.iter().enumerate() {
        let mut seed_mass = vec![0.0; c.targets.len()];
        for (w, cell) in seed.weights.iter().zip(&cells) {
            seed_mass[cell[d]] += w;
        }
        for (k, (m, t)) in seed_mass.iter().zip(&c.targets).enumerate() {
            if *t > 0.0 && *m <= 0.0 {
                return Err(Error::EmptyCategory {
                    dimension: c.dimension.clone(),
                    category: c.categories[k].clone(),
                });
            }
        }
    }

    let mut weights = seed.weights.clone();
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_iter.max(1) {
        sweeps += 1;
        for (d, c) in constraints.iter().enumerate() {
            let mut sums = vec![0.0; c.targets.len()];
            for (w, cell) in weights.iter().zip(&cells) {
                sums[cell[d]] += w;
            }
            let factors: Vec<f64> = sums
                .iter()
                .zip(&c.targets)
                .map(|(s, t)| if *s > 0.0 { t / s } else { 1.0 })
                .collect();
            for (w, cell) in weights.iter_mut().zip(&cells) {
                *w *= factors[cell[d]];
            }
        }
        residual = marginal_residual(&weights, &cells, &constraints);
        if residual <= tol {
            return Ok(IpfFit {
                weights,
                sweeps,
                residual,
                warnings,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: sweeps,
        residual,
    })
}

/// Draw `n_agents` agents multinomially in proportion to `weights`.
pub fn sample_population(
    weights: &[f64],
    seed: &SeedSample,
    n_agents: usize,
    rng_seed: u64,
) -> Result<SyntheticPopulation> {
    if n_agents == 0 {
        return Err(Error::InvalidArgument("n_agents must be > 0".into()));
    }
    if weights.len() != seed.records.len() {
        return Err(Error::DimensionMismatch {
            expected: seed.records.len(),
            got: weights.len(),
        });
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidArgument(format!("sampling weights: {e}")))?;
    let mut rng = stream_rng(rng_seed, streams::SAMPLING);
    let agents = (0..n_agents)
        .map(|id| {
            let rec = &seed.records[dist.sample(&mut rng)];
            Agent {
                id,
                theta: 0.0,
                eta: 0.0,
                categories: rec.categories.clone(),
                attributes: rec.attributes.clone(),
                node: None,
            }
        })
        .collect();
    Ok(SyntheticPopulation {
        dimensions: seed.dimensions.clone(),
        attributes: seed.attributes.clone(),
        agents,
    })
}

/// Single hot-deck imputation within the joint categorical cell.
///
/// A missing attribute is replaced by the value of a donor record drawn
/// uniformly from the seed records that share the agent's categories and
/// carry that attribute. If the cell has no donor the whole seed is the pool.
pub fn impute_missing(
    mut population: SyntheticPopulation,
    seed: &SeedSample,
    rng_seed: u64,
) -> Result<SyntheticPopulation> {
    let n_attr = population.attributes.len();
    let mut by_cell: Vec<BTreeMap<&[String], Vec<f64>>> = vec![BTreeMap::new(); n_attr];
    let mut global: Vec<Vec<f64>> = vec![Vec::new(); n_attr];
    for rec in &seed.records {
        for (a, v) in rec.attributes.iter().enumerate() {
            if let Some(v) = v {
                by_cell[a].entry(rec.categories.as_slice()).or_default().push(*v);
                global[a].push(*v);
            }
        }
    }
    let mut rng = stream_rng(rng_seed, streams::IMPUTATION);
    for agent in &mut population.agents {
        for a in 0..n_attr {
            if agent.attributes[a].is_some() {
                continue;
            }
            let pool = match by_cell[a].get(agent.categories.as_slice()) {
                Some(p) if !p.is_empty() => p,
                _ if !global[a].is_empty() => &global[a],
                _ => return Err(Error::NoDonor(population.attributes[a].clone())),
            };
            agent.attributes[a] = Some(pool[rng.random_range(0..pool.len())]);
        }
    }
    Ok(population)
}

/// Draw θ_i and η_i for every agent from the priors.
///
/// Each attribute uses its own random stream, so adding or changing one prior
/// leaves the draws of the other untouched.
pub fn draw_behavioral_attributes(
    mut population: SyntheticPopulation,
    priors: &[AttributePrior],
    rng_seed: u64,
) -> Result<SyntheticPopulation> {
    for p in priors {
        p.validate()?;
    }
    let find = |name: &str| {
        priors
            .iter()
            .find(|p| p.attribute == name)
            .ok_or_else(|| Error::InvalidPrior {
                attribute: name.to_string(),
                reason: "no prior supplied".into(),
            })
    };
    let theta = find("theta")?;
    let eta = find("eta")?;
    for (prior, is_theta) in [(theta, true), (eta, false)] {
        let lo = match &prior.distribution {
            PriorDistribution::Uniform { low, .. } | PriorDistribution::TruncatedNormal { low, .. } => *low,
            PriorDistribution::Categorical { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        };
        if lo < 0.0 {
            return Err(Error::InvalidPrior {
                attribute: prior.attribute.clone(),
                reason: "support must be nonnegative".into(),
            });
        }
        let mut rng = stream_rng(rng_seed, streams::POPULATION ^ label_stream(&prior.attribute));
        for agent in &mut population.agents {
            let v = prior.sample(&mut rng);
            if is_theta {
                agent.theta = v;
            } else {
                agent.eta = v;
            }
        }
    }
    Ok(population)
}

#[derive(Debug, Deserialize)]
struct MarginalRow {
    dimension: String,
    category: String,
    target: f64,
}

/// Long-format marginals: columns `dimension, category, target`.
pub fn read_marginals<R: Read>(reader: R) -> Result<Vec<MarginalConstraint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut grouped: Vec<(String, Vec<String>, Vec<f64>)> = Vec::new();
    for row in rdr.deserialize::<MarginalRow>() {
        let row = row?;
        match grouped.iter_mut().find(|g| g.0 == row.dimension) {
            Some(g) => {
                g.1.push(row.category);
                g.2.push(row.target);
            }
            None => grouped.push((row.dimension, vec![row.category], vec![row.target])),
        }
    }
    grouped
        .into_iter()
        .map(|(d, c, t)| MarginalConstraint::new(d, c, t))
        .collect()
}

/// Microdata with one column per constrained dimension, optional `weight`
/// column and numeric attribute columns (empty cell = missing).
pub fn read_seed_sample<R: Read>(reader: R, dimensions: &[String]) -> Result<SeedSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut dim_cols = Vec::new();
    for d in dimensions {
        dim_cols.push(
            headers
                .iter()
                .position(|h| h == d)
                .ok_or_else(|| Error::schema(d, "constrained dimension missing from microdata"))?,
        );
    }
    let weight_col = headers.iter().position(|h| h == "weight");
    let attr_cols: Vec<usize> = (0..headers.len())
        .filter(|i| !dim_cols.contains(i) && Some(*i) != weight_col)
        .collect();
    let attributes: Vec<String> = attr_cols.iter().map(|&i| headers[i].to_string()).collect();
    let mut records = Vec::new();
    let mut weights = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let categories = dim_cols.iter().map(|&i| field(i).to_string()).collect::<Vec<_>>();
        if categories.iter().any(String::is_empty) {
            return Err(Error::schema(
                format!("row {}", line + 2),
                "constrained dimensions may not be missing",
            ));
        }
        let mut attrs = Vec::with_capacity(attr_cols.len());
        for &i in &attr_cols {
            let s = field(i);
            attrs.push(if s.is_empty() {
                None
            } else {
                Some(
                    s.parse::<f64>().map_err(|_| {
                        Error::schema(format!("row {}, column {}", line + 2, &headers[i]), "not a number")
                    })?,
                )
            });
        }
        let w = match weight_col {
            Some(i) if !field(i).is_empty() => field(i)
                .parse::<f64>()
                .map_err(|_| Error::schema(format!("row {}, column weight", line + 2), "not a number"))?,
            _ => 1.0,
        };
        records.push(SeedRecord {
            categories,
            attributes: attrs,
        });
        weights.push(w);
    }
    SeedSample::new(dimensions.to_vec(), attributes, records, weights)
}

/// Writes `id, theta, eta, <categoricals...>, <attributes...>, node`.
pub fn write_population<W: Write>(population: &SyntheticPopulation, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["id".to_string(), "theta".into(), "eta".into()];
    header.extend(population.dimensions.iter().cloned());
    header.extend(population.attributes.iter().cloned());
    header.push("node".into());
    w.write_record(&header)?;
    for a in &population.agents {
        let mut row = vec![a.id.to_string(), a.theta.to_string(), a.eta.to_string()];
        row.extend(a.categories.iter().cloned());
        row.extend(
            a.attributes
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        row.push(a.node.map(|n| n.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a population written by [`write_population`]. Columns other than
/// `id, theta, eta, node` are kept as categorical values.
pub fn read_population<R: Read>(reader: R) -> Result<SyntheticPopulation> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (theta_col, eta_col) = match (col("theta"), col("eta")) {
        (Some(t), Some(e)) => (t, e),
        _ => return Err(Error::schema("population", "theta and eta columns are required")),
    };
    let id_col = col("id");
    let node_col = col("node");
    let cat_cols: Vec<usize> = (0..headers.len())
        .filter(|i| ![Some(theta_col), Some(eta_col), id_col, node_col].contains(&Some(*i)))
        .collect();
    let mut agents = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |i: usize, what: &str| -> Result<f64> {
            row.get(i)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::schema(format!("row {}, column {what}", line + 2), "not a number"))
        };
        let theta = num(theta_col, "theta")?;
        let eta = num(eta_col, "eta")?;
        if theta < 0.0 || eta < 0.0 {
            return Err(Error::schema(format!("row {}", line + 2), "theta and eta must be >= 0"));
        }
        let node = match node_col.and_then(|i| row.get(i)).filter(|s| !s.is_empty()) {
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| Error::schema(format!("row {}, column node", line + 2), "not a node index"))?,
            ),
            None => None,
        };
        agents.push(Agent {
            id: agents.len(),
            theta,
            eta,
            categories: cat_cols.iter().map(|&i| row.get(i).unwrap_or("").to_string()).collect(),
            attributes: Vec::new(),
            node,
        });
    }
    Ok(SyntheticPopulation {
        dimensions: cat_cols.iter().map(|&i| headers[i].to_string()).collect(),
        attributes: Vec::new(),
        agents,
    })
}
