//! Standardization, PCA, k-means, diagonal Gaussian mixtures and cluster
//! agreement scores.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rayon::prelude::*;

use crate::rng::{split_seed, stream_rng, streams};
use crate::{Error, Result};

fn check_rows(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map_or(0, Vec::len);
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(d)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviations (n denominator).
    pub sds: Vec<f64>,
    /// Columns that were constant and mapped to zeros.
    pub constant: Vec<bool>,
}

/// Column-wise z-scores.
pub fn standardize(rows: &[Vec<f64>]) -> Result<Standardized> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("standardize needs at least 2 rows".into()));
    }
    let d = check_rows(rows)?;
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sds: Vec<f64> = (0..d)
        .map(|j| (rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let constant: Vec<bool> = (0..d).map(|j| sds[j] <= 1e-12 * means[j].abs().max(1.0)).collect();
    let data = rows
        .iter()
        .map(|r| {
            (0..d)
                .map(|j| if constant[j] { 0.0 } else { (r[j] - means[j]) / sds[j] })
                .collect()
        })
        .collect();
    Ok(Standardized {
        data,
        means,
        sds,
        constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaTarget {
    /// Smallest k whose cumulative explained ratio reaches the target.
    Variance(f64),
    Components(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Retained unit-norm components, one per row, by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance, descending (all of them).
    pub eigenvalues: Vec<f64>,
    /// Explained-variance ratios (all components).
    pub explained_ratio: Vec<f64>,
    pub projected: Vec<Vec<f64>>,
}

impl Pca {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += s * ci;
            }
        }
        x
    }
}

/// Principal components of the sample covariance. Each component's
/// largest-magnitude loading is made positive.
pub fn pca(points: &[Vec<f64>], target: PcaTarget) -> Result<Pca> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    let d = check_rows(points)?;
    if d == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one column".into()));
    }
    if points.len() < d {
        log::warn!("PCA with fewer rows ({}) than columns ({d})", points.len());
    }
    let n = points.len();
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in points {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]).then(a.cmp(b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratio: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|l| l / total).collect()
    } else {
        vec![1.0 / d as f64; d]
    };
    let k = match target {
        PcaTarget::Components(k) => k.clamp(1, d),
        PcaTarget::Variance(v) => {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument("variance target must lie in (0, 1]".into()));
            }
            let mut acc = 0.0;
            let mut k = d;
            for (i, r) in explained_ratio.iter().enumerate() {
                acc += r;
                if acc >= v - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    let components: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&col| {
            let mut c: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let pivot = c
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for x in &mut c {
                *x *= sign / norm;
            }
            c
        })
        .collect();
    let mut out = Pca {
        mean,
        components,
        eigenvalues,
        explained_ratio,
        projected: Vec::new(),
    };
    out.projected = points.iter().map(|p| out.project(p)).collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Final inertia of every restart, in restart order.
    pub restart_inertias: Vec<f64>,
    /// k exceeded the number of distinct points.
    pub duplicate_points: bool,
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn seed_centroids<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[next].clone());
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let k = centroids.len();
    let d = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    for _ in 0..1000 {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its centroid
                let far = points
                    .iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(i, (p, &l))| (i, sq_dist(p, &centroids[l])))
                    .fold((0, -1.0), |best, x| if x.1 > best.1 { x } else { best })
                    .0;
                centroids[c] = points[far].clone();
                counts[c] = 1;
                counts[labels[far]] -= 1;
                labels[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    (labels, centroids, inertia)
}

/// k-means with k-means++ seeding; the best of `restarts` runs by inertia
/// (ties go to the earliest restart).
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeans> {
    check_rows(points)?;
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!("k = {k} with {} points", points.len())));
    }
    let mut distinct = points.to_vec();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    let duplicate_points = k > distinct.len();
    if duplicate_points {
        log::warn!("k = {k} exceeds the {} distinct points", distinct.len());
    }
    let runs: Vec<(Vec<usize>, Vec<Vec<f64>>, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(split_seed(seed, r as u64, streams::SAMPLING), streams::SAMPLING);
            lloyd(points, seed_centroids(points, k, &mut rng))
        })
        .collect();
    let restart_inertias: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let best = (0..runs.len()).fold(0, |b, i| if runs[i].2 < runs[b].2 { i } else { b });
    let (labels, centroids, inertia) = runs.into_iter().nth(best).expect("at least one restart");
    Ok(KMeans {
        labels,
        centroids,
        inertia,
        restart_inertias,
        duplicate_points,
    })
}

pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub responsibilities: Vec<Vec<f64>>,
    pub log_likelihood: Vec<f64>,
    /// Some variance hit the floor.
    pub degenerate: bool,
    pub converged: bool,
}

impl Gmm {
    pub fn labels(&self) -> Vec<usize> {
        self.responsibilities
            .iter()
            .map(|r| (0..r.len()).fold(0, |b, k| if r[k] > r[b] { k } else { b }))
            .collect()
    }
}

fn log_gauss_diag(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((xi, m), v) in x.iter().zip(mean).zip(var) {
        s += -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v);
    }
    s
}

/// EM for a Gaussian mixture with diagonal covariances, initialized from
/// k-means. Stops when the log-likelihood improves by less than `tol`.
pub fn gmm_fit(points: &[Vec<f64>], k: usize, seed: u64, tol: f64, max_iter: usize) -> Result<Gmm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let d = check_rows(points)?;
    let km = kmeans(points, k, 5, seed)?;
    let n = points.len();
    let mut resp: Vec<Vec<f64>> = km
        .labels
        .iter()
        .map(|&l| (0..k).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut degenerate = false;
    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut variances = vec![vec![0.0; d]; k];
    let mut m_step =
        |resp: &[Vec<f64>], weights: &mut Vec<f64>, means: &mut Vec<Vec<f64>>, variances: &mut Vec<Vec<f64>>| {
            for c in 0..k {
                let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>().max(f64::MIN_POSITIVE);
                weights[c] = nk / n as f64;
                for j in 0..d {
                    means[c][j] = resp.iter().zip(points).map(|(r, p)| r[c] * p[j]).sum::<f64>() / nk;
                }
                for j in 0..d {
                    let v = resp
                        .iter()
                        .zip(points)
                        .map(|(r, p)| r[c] * (p[j] - means[c][j]).powi(2))
                        .sum::<f64>()
                        / nk;
                    if v < VARIANCE_FLOOR {
                        degenerate = true;
                    }
                    variances[c][j] = v.max(VARIANCE_FLOOR);
                }
            }
        };
    m_step(&resp, &mut weights, &mut means, &mut variances);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        let mut ll = 0.0;
        for (p, r) in points.iter().zip(resp.iter_mut()) {
            let logs: Vec<f64> = (0..k)
                .map(|c| weights[c].ln() + log_gauss_diag(p, &means[c], &variances[c]))
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
            ll += lse;
            for c in 0..k {
                r[c] = (logs[c] - lse).exp();
            }
        }
        let done = trace.last().is_some_and(|prev: &f64| ll - prev < tol);
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
        m_step(&resp, &mut weights, &mut means, &mut variances);
    }
    if degenerate {
        log::warn!("GMM component variance floored at {VARIANCE_FLOOR}");
    }
    Ok(Gmm {
        weights,
        means,
        variances,
        responsibilities: resp,
        log_likelihood: trace,
        degenerate,
        converged,
    })
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        // both labelings are trivial (one cluster, or all singletons)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Mean silhouette width; points in singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Ok(0.0);
    }
    let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|l| **l == c).count()).collect();
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| {
            if sizes[labels[i]] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    sums[labels[j]] += sq_dist(&points[i], q).sqrt();
                }
            }
            let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
            let b = (0..k)
                .filter(|c| *c != labels[i] && sizes[*c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if a.max(b) == 0.0 {
                0.0
            } else {
                (b - a) / a.max(b)
            }
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / points.len() as f64)
}

/// Silhouette of the k-means solution for each k in 2..=6 (capped at n − 1).
pub fn silhouette_guidance(points: &[Vec<f64>], seed: u64) -> Result<Vec<(usize, f64)>> {
    let top = 6.min(points.len().saturating_sub(1));
    (2..=top)
        .map(|k| {
            let km = kmeans(points, k, 10, seed)?;
            Ok((k, silhouette(points, &km.labels)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::Normal;

    fn blobs(n: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = crate::rng::SimRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..n {
            let c = if i < n / 2 { 0.0 } else { 10.0 };
            pts.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            truth.push(usize::from(i >= n / 2));
        }
        (pts, truth)
    }

    #[test]
    fn standardize_two_points() {
        let s = standardize(&[vec![0.0, 3.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(s.data, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(s.constant, vec![false, true]);
        let same = standardize(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(same.constant.iter().all(|c| *c));
        assert!(same.data.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn standardize_random_matrix() {
        let mut rng = crate::rng::SimRng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|j| rng.random::<f64>() * (j + 1) as f64 * 10.0).collect())
            .collect();
        let s = standardize(&rows).unwrap();
        for j in 0..5 {
            let m: f64 = s.data.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            let v: f64 = s.data.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 100.0;
            assert!(m.abs() <= 1e-12);
            assert!((v.sqrt() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pca_on_a_line() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = pca(&pts, PcaTarget::Variance(1.0)).unwrap();
        assert_eq!(p.components.len(), 1);
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-9);
        assert!(p.components[0][1] > 0.0);
    }

    #[test]
    fn pca_isotropic() {
        let mut rng = crate::rng::SimRng::seed_from_u64(4);
        let n = Normal::new(0.0, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![n.sample(&mut rng), n.sample(&mut rng)])
            .collect();
        let p = pca(&pts, PcaTarget::Components(2)).unwrap();
        for r in &p.explained_ratio {
            assert!((r - 0.5).abs() < 0.05);
        }
    }

    proptest! {
        #[test]
        fn pca_is_orthonormal_and_invertible(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 4..20)) {
            let p = pca(&rows, PcaTarget::Components(3)).unwrap();
            prop_assert!((p.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for a in 0..3 {
                for b in 0..3 {
                    let dot: f64 = p.components[a].iter().zip(&p.components[b]).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-9);
                }
            }
            for (row, proj) in rows.iter().zip(&p.projected) {
                let back = p.reconstruct(proj);
                for (x, y) in row.iter().zip(&back) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn kmeans_returns_best_restart(seed in any::<u64>(), rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..30)) {
            let km = kmeans(&rows, 3, 4, seed).unwrap();
            prop_assert!(km.restart_inertias.iter().all(|r| km.inertia <= *r));
            prop_assert_eq!(km.labels.len(), rows.len());
        }

        #[test]
        fn ari_of_relabeling_is_one(labels in prop::collection::vec(0usize..4, 2..40)) {
            let renamed: Vec<usize> = labels.iter().map(|l| 3 - l).collect();
            prop_assert!((adjusted_rand_index(&labels, &renamed).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kmeans_small_cases() {
        let two = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let km = kmeans(&two, 2, 3, 1).unwrap();
        assert_eq!(km.inertia, 0.0);
        assert_ne!(km.labels[0], km.labels[1]);

        let pts = vec![vec![0.0], vec![1.0], vec![5.0]];
        let km = kmeans(&pts, 1, 1, 0).unwrap();
        assert!((km.centroids[0][0] - 2.0).abs() < 1e-12);
        // population variance 14/3 times n
        assert!((km.inertia - 14.0).abs() < 1e-12);
        assert!(kmeans(&pts, 4, 1, 0).is_err());
        assert!(kmeans(&[vec![1.0], vec![1.0]], 2, 1, 0).unwrap().duplicate_points);
    }

    #[test]
    fn kmeans_two_blobs() {
        let (pts, truth) = blobs(200, 0.5, 11);
        let km = kmeans(&pts, 2, 10, 5).unwrap();
        assert_eq!(adjusted_rand_index(&km.labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn gmm_two_blobs() {
        let (pts, truth) = blobs(200, 0.5, 12);
        let g = gmm_fit(&pts, 2, 3, 1e-8, 200).unwrap();
        let labels = g.labels();
        for (r, l) in g.responsibilities.iter().zip(&labels) {
            assert!(r[*l] >= 0.99);
        }
        assert_eq!(adjusted_rand_index(&labels, &truth).unwrap(), 1.0);
        assert!(g.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn gmm_single_component_is_mle() {
        let pts = vec![vec![1.0, 0.0], vec![2.0, 4.0], vec![6.0, 2.0]];
        let g = gmm_fit(&pts, 1, 0, 1e-10, 50).unwrap();
        assert!((g.means[0][0] - 3.0).abs() < 1e-12);
        assert!((g.variances[0][0] - 14.0 / 3.0).abs() < 1e-12);
        assert!((g.variances[0][1] - 8.0 / 3.0).abs() < 1e-12);
        assert!((g.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_known_value() {
        // contingency [[1,1],[0,2]]: index 1, rows 2, cols 3, total 6
        let a = [0, 0, 1, 1];
        let b = [0, 1, 1, 1];
        let expected = (1.0 - 2.0 * 3.0 / 6.0) / (2.5 - 1.0);
        assert!((adjusted_rand_index(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(adjusted_rand_index(&a, &[0, 1]).is_err());
    }

    #[test]
    fn silhouette_separated() {
        let (pts, truth) = blobs(40, 0.1, 2);
        assert!(silhouette(&pts, &truth).unwrap() > 0.9);
        let g = silhouette_guidance(&pts, 1).unwrap();
        assert_eq!(g.len(), 5);
        assert!(g[0].1 >= g.iter().map(|x| x.1).fold(f64::MIN, f64::max) - 1e-12);
    }
}
