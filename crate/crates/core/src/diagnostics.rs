//! Information-theoretic diagnostics of aggregate trajectories.
//!
//! A real-valued series is symbolized into a small alphabet, then summarized
//! by three numbers: the entropy rate h_μ (bits per step), the statistical
//! complexity C_μ of its reconstructed ε-machine (bits) and the predictive
//! information E between past and future blocks (bits). All entropies are
//! plug-in estimates from overlapping block counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Quantile bins of the aggregate load / emissions.
    Aggregate,
    /// 1 iff the step is overloaded.
    Overload,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticParams {
    pub alphabet: usize,
    /// Longest history; `None` picks 8 for a binary alphabet and 5 otherwise.
    pub l_max: Option<usize>,
    pub significance: f64,
    pub n_min: u64,
    pub observable: Observable,
    /// Block length for E; defaults to half the history length in use.
    pub predictive_l: Option<usize>,
    pub drift_threshold: f64,
    pub cyclic_fraction: f64,
}

impl Default for DiagnosticParams {
    fn default() -> Self {
        Self {
            alphabet: 2,
            l_max: None,
            significance: 0.005,
            n_min: 10,
            observable: Observable::Aggregate,
            predictive_l: None,
            drift_threshold: 2.0,
            cyclic_fraction: 0.4,
        }
    }
}

impl DiagnosticParams {
    pub fn validate(&self) -> Result<()> {
        if self.alphabet < 2 || self.alphabet > 16 {
            return Err(Error::schema("diagnostics.alphabet", "must lie in 2..=16"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::schema("diagnostics.significance", "must lie in (0, 1)"));
        }
        if self.l_max == Some(0) {
            return Err(Error::schema("diagnostics.l_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn default_l_max(&self) -> usize {
        self.l_max.unwrap_or(if self.alphabet == 2 { 8 } else { 5 })
    }

    pub fn cssr(&self, l_max: usize) -> CssrParams {
        CssrParams {
            l_max,
            significance: self.significance,
            n_min: self.n_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSeries {
    pub symbols: Vec<u8>,
    pub alphabet: usize,
    /// Upper edges of bins 0..A−1 (values ≤ edge k fall in bin ≤ k).
    pub edges: Vec<f64>,
    /// The input was constant; every symbol is 0.
    pub degenerate: bool,
}

impl SymbolSeries {
    pub fn new(symbols: Vec<u8>, alphabet: usize) -> Result<Self> {
        if !(2..=255).contains(&alphabet) {
            return Err(Error::InvalidArgument("alphabet must lie in 2..=255".into()));
        }
        if symbols.is_empty() {
            return Err(Error::SeriesTooShort { len: 0, min: 1 });
        }
        if let Some(s) = symbols.iter().find(|s| usize::from(**s) >= alphabet) {
            return Err(Error::InvalidArgument(format!(
                "symbol {s} outside alphabet of {alphabet}"
            )));
        }
        Ok(Self {
            symbols,
            alphabet,
            edges: Vec::new(),
            degenerate: false,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Equal-occupancy symbolization with empirical quantile edges.
///
/// Edge k (k = 1..A−1) is the lower empirical k/A quantile; a value equal to
/// an edge goes to the lower bin. A constant series maps to all zeros with
/// the `degenerate` flag set.
pub fn symbolize(series: &[f64], alphabet: usize) -> Result<SymbolSeries> {
    if !(2..=255).contains(&alphabet) {
        return Err(Error::InvalidArgument("alphabet must lie in 2..=255".into()));
    }
    if series.len() < alphabet {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: alphabet,
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        log::warn!("constant series symbolized to all zeros");
        return Ok(SymbolSeries {
            symbols: vec![0; n],
            alphabet,
            edges: vec![sorted[0]; alphabet - 1],
            degenerate: true,
        });
    }
    let edges: Vec<f64> = (1..alphabet)
        .map(|k| sorted[((k * n).div_ceil(alphabet)).max(1) - 1])
        .collect();
    let symbols = series
        .iter()
        .map(|x| edges.iter().filter(|e| **e < *x).count() as u8)
        .collect();
    Ok(SymbolSeries {
        symbols,
        alphabet,
        edges,
        degenerate: false,
    })
}

/// Binary overload indicator: 1 iff `O_t > 0`.
pub fn overload_indicator(overload: &[f64]) -> Result<SymbolSeries> {
    SymbolSeries::new(overload.iter().map(|o| u8::from(*o > 0.0)).collect(), 2)
}

fn block_counts(sym: &SymbolSeries, len: usize) -> HashMap<u64, u64> {
    let a = sym.alphabet as u64;
    let mut counts = HashMap::new();
    if len == 0 || len > sym.len() {
        return counts;
    }
    let top = a.pow(len as u32 - 1);
    let mut code = 0u64;
    for (i, s) in sym.symbols.iter().enumerate() {
        if i >= len {
            code -= u64::from(sym.symbols[i - len]) * top;
        }
        code = code * a + u64::from(*s);
        if i + 1 >= len {
            *counts.entry(code).or_insert(0) += 1;
        }
    }
    counts
}

fn entropy_of_counts(counts: impl IntoIterator<Item = u64>) -> f64 {
    // sorted so the floating-point sum is independent of hash order
    let mut c: Vec<u64> = counts.into_iter().filter(|c| *c > 0).collect();
    c.sort_unstable();
    let total: u64 = c.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = -c
        .iter()
        .map(|&k| {
            let p = k as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Plug-in Shannon entropy (bits) of the overlapping L-blocks.
pub fn block_entropy(sym: &SymbolSeries, len: usize) -> Result<f64> {
    if len == 0 {
        return Err(Error::InvalidArgument("block length must be >= 1".into()));
    }
    if len > sym.len() {
        return Err(Error::BlockTooLong {
            block: len,
            len: sym.len(),
        });
    }
    if (sym.alphabet as f64).log2() * len as f64 > 63.0 {
        return Err(Error::InvalidArgument("block too long to encode".into()));
    }
    Ok(entropy_of_counts(block_counts(sym, len).into_values()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRate {
    /// H(L_max) − H(L_max − 1).
    pub h_mu: f64,
    /// Block-entropy differences for L = 1..=L_max (H(0) = 0).
    pub curve: Vec<f64>,
    /// Block entropies H(1..=L_max).
    pub block_entropies: Vec<f64>,
    /// Fewer than 10·A^L_max symbols.
    pub undersampled: bool,
}

pub fn entropy_rate(sym: &SymbolSeries, l_max: usize) -> Result<EntropyRate> {
    if l_max < 2 {
        return Err(Error::InvalidArgument("entropy rate needs L_max >= 2".into()));
    }
    let mut blocks = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        blocks.push(block_entropy(sym, l)?);
    }
    let mut curve = Vec::with_capacity(l_max);
    let mut prev = 0.0;
    for h in &blocks {
        curve.push(h - prev);
        prev = *h;
    }
    let undersampled = (sym.len() as f64) < 10.0 * (sym.alphabet as f64).powi(l_max as i32);
    if undersampled {
        log::warn!("entropy rate at L = {l_max} from only {} symbols", sym.len());
    }
    Ok(EntropyRate {
        h_mu: curve[l_max - 1].max(0.0),
        curve,
        block_entropies: blocks,
        undersampled,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveInformation {
    pub e_pred: f64,
    /// Raw estimate before clamping at 0.
    pub raw: f64,
    /// The raw value was below −0.01 bits.
    pub negative_flag: bool,
}

/// `E(L) = 2·H(L) − H(2L)`, clamped at 0.
pub fn predictive_information(sym: &SymbolSeries, len: usize) -> Result<PredictiveInformation> {
    if 2 * len > sym.len() {
        return Err(Error::BlockTooLong {
            block: 2 * len,
            len: sym.len(),
        });
    }
    let raw = 2.0 * block_entropy(sym, len)? - block_entropy(sym, 2 * len)?;
    Ok(PredictiveInformation {
        e_pred: raw.max(0.0),
        raw,
        negative_flag: raw < -0.01,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CssrParams {
    pub l_max: usize,
    pub significance: f64,
    pub n_min: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalState {
    /// Suffix histories (oldest symbol first) assigned to this state.
    pub histories: Vec<Vec<u8>>,
    /// Pooled next-symbol counts.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMachine {
    pub alphabet: usize,
    pub states: Vec<CausalState>,
    /// `transitions[s][a] = Some((next state, P(a | s)))`.
    pub transitions: Vec<Vec<Option<(usize, f64)>>>,
    pub stationary: Vec<f64>,
    /// History length of the recurrent states.
    pub history_length: usize,
    /// Histories skipped for having fewer than `n_min` observations.
    pub insufficient: Vec<Vec<u8>>,
}

impl EpsilonMachine {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Next-symbol distribution of state `s`.
    pub fn morph(&self, s: usize) -> Vec<f64> {
        self.transitions[s].iter().map(|t| t.map_or(0.0, |(_, p)| p)).collect()
    }
}

/// p-value of the chi-squared homogeneity test between two count vectors,
/// with Yates' correction when the table is 2×2.
fn homogeneity_p_value(a: &[u64], b: &[u64]) -> f64 {
    let cols: Vec<usize> = (0..a.len()).filter(|&k| a[k] + b[k] > 0).collect();
    let (na, nb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    if cols.len() < 2 || na == 0 || nb == 0 {
        return 1.0;
    }
    let n = (na + nb) as f64;
    let yates = if cols.len() == 2 { 0.5 } else { 0.0 };
    let mut stat = 0.0;
    for &k in &cols {
        let col = (a[k] + b[k]) as f64;
        for (obs, row) in [(a[k], na), (b[k], nb)] {
            let expected = row as f64 * col / n;
            let dev = ((obs as f64 - expected).abs() - yates).max(0.0);
            stat += dev * dev / expected;
        }
    }
    let dist = ChiSquared::new((cols.len() - 1) as f64).expect("df >= 1");
    (1.0 - dist.cdf(stat)).max(0.0)
}

/// Causal-state reconstruction by suffix splitting (CSSR).
///
/// Histories are grown one symbol into the past at a time. A new history
/// joins its parent's state unless a chi-squared test on next-symbol counts
/// rejects equality; it then joins the best-matching other state, or starts
/// a new one. The tests at each history length share a Bonferroni-corrected
/// level `significance / m_L`, which keeps the number of spurious splits
/// bounded as L grows. Only the longest histories are kept, and states are
/// then split until every state has a single successor per symbol. The
/// stationary distribution is the fixed point of the (lazy) state chain.
pub fn reconstruct_epsilon_machine(sym: &SymbolSeries, params: &CssrParams) -> Result<EpsilonMachine> {
    if params.l_max == 0 {
        return Err(Error::InvalidArgument("L_max must be >= 1".into()));
    }
    if !(params.significance > 0.0 && params.significance < 1.0) {
        return Err(Error::InvalidArgument("significance must lie in (0, 1)".into()));
    }
    if params.l_max >= sym.len() {
        return Err(Error::BlockTooLong {
            block: params.l_max + 1,
            len: sym.len(),
        });
    }
    let a = sym.alphabet;
    // next-symbol counts per history, for every history length 0..=L_max
    let mut counts: Vec<BTreeMap<Vec<u8>, Vec<u64>>> = vec![BTreeMap::new(); params.l_max + 1];
    for (l, table) in counts.iter_mut().enumerate() {
        for i in l..sym.len() {
            table
                .entry(sym.symbols[i - l..i].to_vec())
                .or_insert_with(|| vec![0; a])[usize::from(sym.symbols[i])] += 1;
        }
    }

    let mut states = vec![CausalState {
        histories: vec![Vec::new()],
        counts: counts[0][&Vec::new()].clone(),
    }];
    let mut state_of: HashMap<Vec<u8>, usize> = HashMap::from([(Vec::new(), 0)]);
    let mut insufficient = Vec::new();
    let mut deepest = 0;

    for l in 1..=params.l_max {
        let parents: Vec<Vec<u8>> = counts[l - 1]
            .keys()
            .filter(|h| state_of.contains_key(*h))
            .cloned()
            .collect();
        let mut children = Vec::new();
        for parent in &parents {
            for s in 0..a as u8 {
                let mut child = Vec::with_capacity(l);
                child.push(s);
                child.extend_from_slice(parent);
                if let Some(c) = counts[l].get(&child) {
                    if c.iter().sum::<u64>() < params.n_min {
                        insufficient.push(child);
                    } else {
                        children.push((child, state_of[parent]));
                    }
                }
            }
        }
        if children.is_empty() {
            break;
        }
        deepest = l;
        let level_alpha = params.significance / children.len() as f64;
        for (child, parent_state) in children {
            let c = &counts[l][&child];
            let target = if homogeneity_p_value(c, &states[parent_state].counts) >= level_alpha {
                Some(parent_state)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (k, st) in states.iter().enumerate() {
                    if k == parent_state {
                        continue;
                    }
                    let p = homogeneity_p_value(c, &st.counts);
                    if p >= level_alpha && best.is_none_or(|(_, bp)| p > bp) {
                        best = Some((k, p));
                    }
                }
                best.map(|(k, _)| k)
            };
            let k = match target {
                Some(k) => k,
                None => {
                    states.push(CausalState {
                        histories: Vec::new(),
                        counts: vec![0; a],
                    });
                    states.len() - 1
                }
            };
            for (acc, x) in states[k].counts.iter_mut().zip(c) {
                *acc += x;
            }
            states[k].histories.push(child.clone());
            state_of.insert(child, k);
        }
    }
    if !insufficient.is_empty() {
        log::warn!(
            "{} histories skipped with fewer than {} observations",
            insufficient.len(),
            params.n_min
        );
    }

    // Keep the recurrent part: histories of the deepest length reached.
    let mut states: Vec<CausalState> = states
        .into_iter()
        .filter_map(|st| {
            let histories: Vec<Vec<u8>> = st.histories.into_iter().filter(|h| h.len() == deepest).collect();
            if histories.is_empty() {
                return None;
            }
            let mut pooled = vec![0; a];
            for h in &histories {
                for (acc, x) in pooled.iter_mut().zip(&counts[deepest][h]) {
                    *acc += x;
                }
            }
            Some(CausalState {
                histories,
                counts: pooled,
            })
        })
        .collect();

    // Determinize: split states until each (state, symbol) has one successor.
    let successor_history = |h: &[u8], s: u8| -> Vec<u8> {
        let mut next = h.to_vec();
        next.push(s);
        if next.len() > deepest {
            next.remove(0);
        }
        next
    };
    loop {
        let owner: HashMap<&[u8], usize> = states
            .iter()
            .enumerate()
            .flat_map(|(k, st)| st.histories.iter().map(move |h| (h.as_slice(), k)))
            .collect();
        let mut split: Option<(usize, Vec<Vec<Vec<u8>>>)> = None;
        'scan: for (k, st) in states.iter().enumerate() {
            for s in 0..a as u8 {
                let mut groups: Vec<(usize, Vec<Vec<u8>>)> = Vec::new();
                let mut unknown = Vec::new();
                for h in &st.histories {
                    if counts[deepest][h][usize::from(s)] == 0 {
                        unknown.push(h.clone());
                        continue;
                    }
                    match owner.get(successor_history(h, s).as_slice()) {
                        Some(&succ) => match groups.iter_mut().find(|g| g.0 == succ) {
                            Some(g) => g.1.push(h.clone()),
                            None => groups.push((succ, vec![h.clone()])),
                        },
                        None => unknown.push(h.clone()),
                    }
                }
                if groups.len() > 1 {
                    let mut parts: Vec<Vec<Vec<u8>>> = groups.into_iter().map(|g| g.1).collect();
                    parts[0].extend(unknown);
                    split = Some((k, parts));
                    break 'scan;
                }
            }
        }
        let Some((k, parts)) = split else { break };
        let mut rebuilt: Vec<CausalState> = parts
            .into_iter()
            .map(|histories| {
                let mut pooled = vec![0; a];
                for h in &histories {
                    for (acc, x) in pooled.iter_mut().zip(&counts[deepest][h]) {
                        *acc += x;
                    }
                }
                CausalState {
                    histories,
                    counts: pooled,
                }
            })
            .collect();
        states[k] = rebuilt.remove(0);
        states.extend(rebuilt);
    }

    let owner: HashMap<&[u8], usize> = states
        .iter()
        .enumerate()
        .flat_map(|(k, st)| st.histories.iter().map(move |h| (h.as_slice(), k)))
        .collect();
    let mut transitions = Vec::with_capacity(states.len());
    for st in &states {
        let mut row: Vec<Option<(usize, f64)>> = vec![None; a];
        let mut mass = 0u64;
        for s in 0..a as u8 {
            if st.counts[usize::from(s)] == 0 {
                continue;
            }
            let succ = st
                .histories
                .iter()
                .filter(|h| counts[deepest][*h][usize::from(s)] > 0)
                .find_map(|h| owner.get(successor_history(h, s).as_slice()).copied());
            if let Some(next) = succ {
                row[usize::from(s)] = Some((next, st.counts[usize::from(s)] as f64));
                mass += st.counts[usize::from(s)];
            }
        }
        for (_, p) in row.iter_mut().flatten() {
            *p /= mass as f64;
        }
        transitions.push(row);
    }
    let stationary = stationary_distribution(&transitions, states.len());
    Ok(EpsilonMachine {
        alphabet: a,
        states,
        transitions,
        stationary,
        history_length: deepest,
        insufficient,
    })
}

/// Fixed point of the state chain by power iteration on (I + T)/2, which has
/// the same stationary distribution but also converges for periodic chains.
fn stationary_distribution(transitions: &[Vec<Option<(usize, f64)>>], n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next: Vec<f64> = pi.iter().map(|p| 0.5 * p).collect();
        for (s, row) in transitions.iter().enumerate() {
            let out: f64 = row.iter().flatten().map(|(_, p)| p).sum();
            if out == 0.0 {
                // absorbing dead end: keep mass in place
                next[s] += 0.5 * pi[s];
                continue;
            }
            for (succ, p) in row.iter().flatten() {
                next[*succ] += 0.5 * pi[s] * p;
            }
        }
        let total: f64 = next.iter().sum();
        for x in &mut next {
            *x /= total;
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-12 {
            break;
        }
    }
    pi
}

/// `C_μ = −Σ π_s log2 π_s`.
pub fn statistical_complexity(machine: &EpsilonMachine) -> f64 {
    shannon_bits(&machine.stationary)
}

/// `h_μ = Σ_s π_s · H[next symbol | s]`.
pub fn machine_entropy_rate(machine: &EpsilonMachine) -> f64 {
    machine
        .stationary
        .iter()
        .enumerate()
        .map(|(s, p)| p * shannon_bits(&machine.morph(s)))
        .sum()
}

fn shannon_bits(p: &[f64]) -> f64 {
    0.0 - p.iter().filter(|x| **x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryClass {
    Stationary,
    Cyclic,
    Drifting,
}

impl TrajectoryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryClass::Stationary => "stationary",
            TrajectoryClass::Cyclic => "cyclic",
            TrajectoryClass::Drifting => "drifting",
        }
    }
}

impl fmt::Display for TrajectoryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MIN_CLASSIFY_LEN: usize = 64;

/// Stationary / cyclic / drifting label for a post-burn-in series.
///
/// Drifting when `|LS slope| · n > drift_threshold · sd`. Otherwise cyclic
/// when the largest nonzero-frequency periodogram peak (the top bin plus its
/// two neighbours, to absorb leakage between bins) holds more than
/// `cyclic_fraction` of the nonzero-frequency power.
pub fn classify_trajectory(series: &[f64], drift_threshold: f64, cyclic_fraction: f64) -> Result<TrajectoryClass> {
    let n = series.len();
    if n < MIN_CLASSIFY_LEN {
        return Err(Error::SeriesTooShort {
            len: n,
            min: MIN_CLASSIFY_LEN,
        });
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let t_mean = (nf - 1.0) / 2.0;
    let sxx: f64 = (0..n).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let sxy: f64 = series
        .iter()
        .enumerate()
        .map(|(t, y)| (t as f64 - t_mean) * (y - mean))
        .sum();
    let slope = sxy / sxx;
    let sd = crate::engine::sample_sd(series.iter());
    if slope.abs() * nf > drift_threshold * sd {
        return Ok(TrajectoryClass::Drifting);
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|y| Complex::new(y - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return Ok(TrajectoryClass::Stationary);
    }
    let (peak, _) = power.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (k, p)| if *p > best.1 { (k, *p) } else { best },
    );
    let lo = peak.saturating_sub(1);
    let hi = (peak + 1).min(power.len() - 1);
    let peak_power: f64 = power[lo..=hi].iter().sum();
    if peak_power / total > cyclic_fraction {
        Ok(TrajectoryClass::Cyclic)
    } else {
        Ok(TrajectoryClass::Stationary)
    }
}

/// The run-level diagnostic bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoMeasures {
    pub h_mu: f64,
    #[serde(rename = "C_mu")]
    pub c_mu: f64,
    #[serde(rename = "E_pred")]
    pub e_pred: f64,
    pub n_states: usize,
    pub classification: Option<TrajectoryClass>,
    #[serde(rename = "L_used")]
    pub l_used: usize,
    #[serde(rename = "A")]
    pub alphabet: usize,
    /// Entropy rate read off the reconstructed machine (cross-check).
    #[serde(skip)]
    pub h_mu_machine: f64,
    #[serde(skip)]
    pub degenerate: bool,
}

/// Longest history the sample supports: `n ≥ 10·A^L`, within `[2, l_max]`.
pub fn usable_history(n: usize, alphabet: usize, l_max: usize) -> usize {
    let mut l = 2;
    while l < l_max && (n as f64) >= 10.0 * (alphabet as f64).powi(l as i32 + 1) {
        l += 1;
    }
    l.min(l_max.max(2))
}

/// Symbolize and measure a post-burn-in trajectory.
///
/// `overload` is only read when the overload-indicator observable is chosen.
pub fn analyze(aggregate: &[f64], overload: &[f64], params: &DiagnosticParams) -> Result<InfoMeasures> {
    let sym = match params.observable {
        Observable::Aggregate => symbolize(aggregate, params.alphabet)?,
        Observable::Overload => overload_indicator(overload)?,
    };
    let classification = if aggregate.len() >= MIN_CLASSIFY_LEN {
        Some(classify_trajectory(
            aggregate,
            params.drift_threshold,
            params.cyclic_fraction,
        )?)
    } else {
        None
    };
    analyze_symbols(&sym, params, classification)
}

pub fn analyze_symbols(
    sym: &SymbolSeries,
    params: &DiagnosticParams,
    classification: Option<TrajectoryClass>,
) -> Result<InfoMeasures> {
    let l_used = usable_history(sym.len(), sym.alphabet, params.default_l_max());
    if sym.len() <= l_used + 1 {
        return Err(Error::SeriesTooShort {
            len: sym.len(),
            min: l_used + 2,
        });
    }
    let rate = entropy_rate(sym, l_used)?;
    let machine = reconstruct_epsilon_machine(sym, &params.cssr(l_used))?;
    let e_len = params.predictive_l.unwrap_or((l_used / 2).max(1));
    let e = predictive_information(sym, e_len)?;
    Ok(InfoMeasures {
        h_mu: rate.h_mu,
        c_mu: statistical_complexity(&machine),
        e_pred: e.e_pred,
        n_states: machine.n_states(),
        classification,
        l_used,
        alphabet: sym.alphabet,
        h_mu_machine: machine_entropy_rate(&machine),
        degenerate: sym.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(v: &[u8], a: usize) -> SymbolSeries {
        SymbolSeries::new(v.to_vec(), a).unwrap()
    }

    fn periodic(p: usize, n: usize) -> SymbolSeries {
        // one 1 per period: 0..01 repeated
        syms(&(0..n).map(|i| u8::from(i % p == p - 1)).collect::<Vec<_>>(), 2)
    }

    #[test]
    fn median_split() {
        let s = symbolize(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(s.symbols, vec![0, 0, 1, 1]);
        assert!(!s.degenerate);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let s = symbolize(&[5.0; 10], 3).unwrap();
        assert!(s.degenerate);
        assert!(s.symbols.iter().all(|x| *x == 0));
    }

    #[test]
    fn symbolize_preconditions() {
        assert_eq!(symbolize(&[1.0], 2).unwrap_err().name(), "SeriesTooShort");
        assert!(symbolize(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn ties_go_low() {
        let s = symbolize(&[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(s.symbols, vec![0, 0, 0, 1]);
    }

    #[test]
    fn block_entropy_examples() {
        assert_eq!(block_entropy(&syms(&[0; 20], 2), 3).unwrap(), 0.0);
        let alt = periodic(2, 100);
        assert!((block_entropy(&alt, 2).unwrap() - 1.0).abs() < 1e-3);
        assert!((block_entropy(&alt, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(block_entropy(&alt, 101).unwrap_err().name(), "BlockTooLong");
    }

    #[test]
    fn entropy_rate_of_deterministic_processes() {
        assert_eq!(entropy_rate(&syms(&[1; 50], 2), 3).unwrap().h_mu, 0.0);
        let r = entropy_rate(&periodic(2, 1000), 4).unwrap();
        assert!(r.h_mu < 1e-2);
        assert_eq!(r.curve.len(), 4);
        assert!(entropy_rate(&periodic(2, 10), 4).unwrap().undersampled);
    }

    #[test]
    fn predictive_information_examples() {
        let e = predictive_information(&periodic(2, 1000), 3).unwrap();
        assert!((e.e_pred - 1.0).abs() < 1e-2);
        assert_eq!(predictive_information(&syms(&[0; 30], 2), 4).unwrap().e_pred, 0.0);
        assert!(predictive_information(&syms(&[0; 5], 2), 3).is_err());
    }

    #[test]
    fn period_two_machine() {
        let m = reconstruct_epsilon_machine(
            &periodic(2, 2000),
            &CssrParams {
                l_max: 4,
                significance: 0.005,
                n_min: 10,
            },
        )
        .unwrap();
        assert_eq!(m.n_states(), 2);
        for s in 0..2 {
            let morph = m.morph(s);
            assert!(morph.contains(&1.0));
            assert!((m.stationary[s] - 0.5).abs() < 1e-9);
        }
        assert!(machine_entropy_rate(&m).abs() < 1e-12);
        assert!((statistical_complexity(&m) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn machine_is_unifilar_and_normalized() {
        let m = reconstruct_epsilon_machine(
            &periodic(3, 3000),
            &CssrParams {
                l_max: 5,
                significance: 0.005,
                n_min: 10,
            },
        )
        .unwrap();
        for row in &m.transitions {
            let total: f64 = row.iter().flatten().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!((m.stationary.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.n_states(), 3);
    }

    #[test]
    fn single_state_complexity_is_zero() {
        let m = EpsilonMachine {
            alphabet: 2,
            states: vec![CausalState {
                histories: vec![vec![]],
                counts: vec![1, 1],
            }],
            transitions: vec![vec![Some((0, 0.5)), Some((0, 0.5))]],
            stationary: vec![1.0],
            history_length: 0,
            insufficient: vec![],
        };
        assert_eq!(statistical_complexity(&m), 0.0);
        assert!((machine_entropy_rate(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complexity_of_two_thirds_one_third() {
        let m = EpsilonMachine {
            alphabet: 2,
            states: vec![],
            transitions: vec![vec![Some((0, 0.5)), Some((1, 0.5))], vec![Some((0, 1.0)), None]],
            stationary: vec![2.0 / 3.0, 1.0 / 3.0],
            history_length: 1,
            insufficient: vec![],
        };
        // direct evaluation: −(2/3)log2(2/3) − (1/3)log2(1/3)
        let oracle = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        assert!((statistical_complexity(&m) - oracle).abs() < 1e-12);
        assert!((statistical_complexity(&m) - 0.9183).abs() < 1e-4);
        assert!((machine_entropy_rate(&m) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_of_periodic_chain_converges() {
        let t = vec![vec![Some((1, 1.0))], vec![Some((2, 1.0))], vec![Some((0, 1.0))]];
        let pi = stationary_distribution(&t, 3);
        assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn chi_squared_sanity() {
        assert_eq!(homogeneity_p_value(&[10, 0], &[20, 0]), 1.0);
        assert!(homogeneity_p_value(&[100, 0], &[0, 100]) < 1e-10);
        assert!(homogeneity_p_value(&[50, 50], &[500, 500]) > 0.5);
        assert!(homogeneity_p_value(&[30, 30, 30], &[300, 300, 300]) > 0.5);
    }

    #[test]
    fn classifier_examples() {
        let ramp: Vec<f64> = (0..200).map(|t| t as f64).collect();
        assert_eq!(classify_trajectory(&ramp, 2.0, 0.4).unwrap(), TrajectoryClass::Drifting);
        let wave: Vec<f64> = (0..200)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 23.0).sin())
            .collect();
        assert_eq!(classify_trajectory(&wave, 2.0, 0.4).unwrap(), TrajectoryClass::Cyclic);
        assert_eq!(
            classify_trajectory(&[1.0; 100], 2.0, 0.4).unwrap(),
            TrajectoryClass::Stationary
        );
        assert_eq!(
            classify_trajectory(&[1.0; 10], 2.0, 0.4).unwrap_err().name(),
            "SeriesTooShort"
        );
    }

    #[test]
    fn usable_history_shrinks_with_data() {
        assert_eq!(usable_history(100_000, 2, 8), 8);
        assert_eq!(usable_history(1500, 2, 8), 7);
        assert_eq!(usable_history(100, 2, 8), 3);
        assert_eq!(usable_history(10, 2, 8), 2);
    }

    #[test]
    fn iid_coin_has_no_predictive_information() {
        use rand::{Rng, SeedableRng};
        let mut rng = crate::rng::SimRng::seed_from_u64(3);
        let coin = syms(
            &(0..100_000).map(|_| u8::from(rng.random::<bool>())).collect::<Vec<_>>(),
            2,
        );
        // plug-in bias of 2H(4) − H(8) is about (2^8 − 2·2^4)/(2n ln 2) ≈ 0.0016 bits
        assert!(predictive_information(&coin, 4).unwrap().e_pred.abs() <= 0.02);
    }

    #[test]
    fn golden_mean_machine_rate() {
        // A emits 0 → A or 1 → B with equal probability; B emits 0 → A
        let m = EpsilonMachine {
            alphabet: 2,
            states: vec![],
            transitions: vec![vec![Some((0, 0.5)), Some((1, 0.5))], vec![Some((0, 1.0)), None]],
            stationary: stationary_distribution(&[vec![Some((0, 0.5)), Some((1, 0.5))], vec![Some((0, 1.0)), None]], 2),
            history_length: 1,
            insufficient: vec![],
        };
        assert!((m.stationary[0] - 2.0 / 3.0).abs() < 1e-9);
        // π_A · 1 bit + π_B · 0
        assert!((machine_entropy_rate(&m) - 2.0 / 3.0).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn entropies_are_bounded(v in proptest::collection::vec(0u8..3, 20..200), l in 1usize..4) {
            let s = syms(&v, 3);
            let h = block_entropy(&s, l).unwrap();
            proptest::prop_assert!(h >= 0.0 && h <= l as f64 * 3f64.log2() + 1e-12);
            // never more than log2 of the number of observed blocks
            proptest::prop_assert!(h <= ((s.len() - l + 1) as f64).log2() + 1e-12);
        }

        #[test]
        fn symbols_stay_in_alphabet(v in proptest::collection::vec(-100.0f64..100.0, 4..200), a in 2usize..6) {
            proptest::prop_assume!(v.len() >= a);
            let s = symbolize(&v, a).unwrap();
            proptest::prop_assert!(s.symbols.iter().all(|x| usize::from(*x) < a));
            proptest::prop_assert_eq!(s.symbols.len(), v.len());
        }
    }
}
