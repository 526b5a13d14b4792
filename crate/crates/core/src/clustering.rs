//! Deterministic K-means (k-means++ seeding, Lloyd iterations) used for
//! superpoint growing, basis grouping and pseudo-label generation.
//!
//! Results depend only on the data and the seed. The assignment step may run
//! on the rayon pool, but every reduction is summed in ascending row order,
//! so the worker count never changes a single bit of the output.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

/// Rows below this count are assigned on the calling thread.
const PARALLEL_ROWS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls to this value.
    pub tol: f64,
    pub rng_seed: u64,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 1,
            max_iters: 300,
            tol: 1e-6,
            rng_seed: DEFAULT_SEED,
            restarts: 1,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(k: usize) -> Self {
        KMeansConfig {
            k,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k-means: k must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("k-means: max_iters must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("k-means: tol must be non-negative"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("k-means: restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<u32>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances from each row to its assigned centroid.
    pub objective: f64,
    pub iters_run: usize,
    /// Objective after every assignment step of the winning restart.
    pub history: Vec<f64>,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_data(data: ArrayView2<'_, f64>, k: usize) -> Result<()> {
    if data.nrows() < k {
        return Err(Error::invalid(format!(
            "k-means: {} rows cannot form {k} clusters",
            data.nrows()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means: non-finite input value"));
    }
    Ok(())
}

/// k-means++ seeding: the first centroid is a uniformly drawn row, each later
/// one is drawn with probability proportional to its squared distance to the
/// nearest centroid chosen so far.
pub fn kmeans_init(data: ArrayView2<'_, f64>, k: usize, rng_seed: u64) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::invalid("k-means: k must be at least 1"));
    }
    check_data(data, k)?;
    let n = data.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];

    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();

    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| nearest[i]).sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = None;
            for i in (0..n).filter(|&i| !taken[i] && nearest[i] > 0.0) {
                acc += nearest[i];
                last_positive = Some(i);
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.or(last_positive).expect("positive total implies a positive weight")
        } else {
            // Every remaining row duplicates a chosen centroid.
            (0..n).find(|&i| !taken[i]).expect("rows >= k")
        };
        chosen.push(pick);
        taken[pick] = true;
        for i in 0..n {
            let d = sq_dist(data.row(i), data.row(pick));
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }

    let mut centroids = Array2::zeros((k, data.ncols()));
    for (c, &row) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(row));
    }
    Ok(centroids)
}

/// Nearest centroid per row (ties go to the lower centroid index) together
/// with the squared distance.
fn assign(data: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> Vec<(u32, f64)> {
    let nearest = |i: usize| {
        let row = data.row(i);
        let mut best = (0u32, f64::INFINITY);
        for (c, centroid) in centroids.outer_iter().enumerate() {
            let d = sq_dist(row, centroid);
            if d < best.1 {
                best = (c as u32, d);
            }
        }
        best
    };
    if data.nrows() >= PARALLEL_ROWS {
        (0..data.nrows()).into_par_iter().map(nearest).collect()
    } else {
        (0..data.nrows()).map(nearest).collect()
    }
}

/// Per-cluster means, summing rows in ascending index order.
fn cluster_means(data: ArrayView2<'_, f64>, assignments: &[u32], k: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((k, data.ncols()));
    let mut counts = vec![0usize; k];
    for (row, &a) in data.outer_iter().zip(assignments) {
        let mut s = sums.row_mut(a as usize);
        s += &row;
        counts[a as usize] += 1;
    }
    for (mut s, &c) in sums.outer_iter_mut().zip(&counts) {
        if c > 0 {
            s /= c as f64;
        }
    }
    sums
}

/// Moves the row farthest from its centroid into each empty cluster, taking
/// only rows whose cluster keeps at least one other member.
fn repair_empty(assignments: &mut [u32], dists: &mut [f64], k: usize) -> bool {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a as usize] += 1;
    }
    let mut repaired = false;
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..assignments.len() {
            if sizes[assignments[i] as usize] > 1 && far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        let i = far.expect("rows >= k leaves a cluster with two members");
        sizes[assignments[i] as usize] -= 1;
        sizes[empty] += 1;
        assignments[i] = empty as u32;
        dists[i] = 0.0;
        repaired = true;
    }
    repaired
}

fn lloyd(data: ArrayView2<'_, f64>, cfg: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let k = cfg.k;
    let mut centroids = kmeans_init(data, k, seed)?;
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    // Assignment and centroids that produced `prev`, when no repair intervened.
    let mut prev_state: Option<(Vec<u32>, Array2<f64>)> = None;
    for iter in 1..=cfg.max_iters {
        let (mut assignments, mut dists): (Vec<u32>, Vec<f64>) =
            assign(data, &centroids).into_iter().unzip();
        let objective: f64 = dists.iter().sum();
        if let Some((assignments, centroids)) = prev_state.take() {
            // Only rounding can raise the objective here; the previous state
            // is the better fixed point.
            if objective > prev {
                return Ok(KMeansResult {
                    assignments,
                    centroids,
                    objective: prev,
                    iters_run: iter - 1,
                    history,
                });
            }
        }
        history.push(objective);

        let last = iter == cfg.max_iters;
        let had_empty = repair_empty(&mut assignments, &mut dists, k);
        if !had_empty {
            let converged =
                objective == 0.0 || (prev.is_finite() && prev - objective <= cfg.tol * prev);
            if converged || last {
                return Ok(KMeansResult {
                    assignments,
                    centroids,
                    objective,
                    iters_run: iter,
                    history,
                });
            }
        }
        let next = cluster_means(data, &assignments, k);
        if !had_empty {
            prev_state = Some((assignments.clone(), std::mem::replace(&mut centroids, next)));
        } else {
            centroids = next;
        }
        if last {
            // Budget ran out right after a repair: keep the repaired
            // assignment so every cluster stays populated.
            let objective = objective_of(data, &assignments, &centroids);
            return Ok(KMeansResult {
                assignments,
                centroids,
                objective,
                iters_run: iter,
                history,
            });
        }
        prev = objective;
    }
    unreachable!("max_iters >= 1")
}

/// Hartigan-style refinement: moves single rows between clusters while that
/// lowers the objective once both cluster means are updated. Lloyd fixed
/// points are often not stable under such moves, and every stable state is a
/// Lloyd fixed point, so this only ever improves the result.
fn refine_single_moves(data: ArrayView2<'_, f64>, run: &mut KMeansResult, max_passes: usize) {
    let k = run.k();
    if k < 2 {
        return;
    }
    let mut counts = vec![0usize; k];
    run.assignments.iter().for_each(|&a| counts[a as usize] += 1);
    let mut means = cluster_means(data, &run.assignments, k);
    for _ in 0..max_passes {
        let before = run.assignments.clone();
        let mut moved = false;
        for (i, row) in data.outer_iter().enumerate() {
            let from = run.assignments[i] as usize;
            let nf = counts[from];
            if nf < 2 {
                continue;
            }
            let remove_gain = nf as f64 / (nf - 1) as f64 * sq_dist(row, means.row(from));
            let mut best: Option<(usize, f64)> = None;
            for to in (0..k).filter(|&c| c != from) {
                let nt = counts[to];
                let add_cost = nt as f64 / (nt + 1) as f64 * sq_dist(row, means.row(to));
                if best.is_none_or(|b| add_cost < b.1) {
                    best = Some((to, add_cost));
                }
            }
            let (to, add_cost) = best.expect("k >= 2");
            // relative margin keeps rounding noise from cycling a row back and forth
            if add_cost >= remove_gain * (1.0 - 1e-12) {
                continue;
            }
            let nt = counts[to];
            let mut m_from = means.row_mut(from);
            m_from *= nf as f64;
            m_from -= &row;
            m_from /= (nf - 1) as f64;
            let mut m_to = means.row_mut(to);
            m_to *= nt as f64;
            m_to += &row;
            m_to /= (nt + 1) as f64;
            counts[from] -= 1;
            counts[to] += 1;
            run.assignments[i] = to as u32;
            moved = true;
        }
        if !moved {
            break;
        }
        // Score the pass with freshly summed means; a pass that does not
        // strictly lower that objective only chased rounding and is undone.
        let fresh = cluster_means(data, &run.assignments, k);
        let objective = objective_of(data, &run.assignments, &fresh);
        if !(objective < run.objective) {
            run.assignments = before;
            break;
        }
        means = fresh;
        run.centroids = means.clone();
        run.objective = objective;
        run.history.push(objective);
        run.iters_run += 1;
    }
}

fn objective_of(data: ArrayView2<'_, f64>, assignments: &[u32], centroids: &Array2<f64>) -> f64 {
    data.outer_iter()
        .zip(assignments)
        .map(|(row, &a)| sq_dist(row, centroids.row(a as usize)))
        .sum()
}

/// Runs `restarts` seeded Lloyd runs (seed, seed+1, ...), each polished by
/// single-row moves, and keeps the lowest objective, earliest restart on ties.
pub fn kmeans_fit(data: ArrayView2<'_, f64>, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    check_data(data, cfg.k)?;
    let mut best: Option<KMeansResult> = None;
    for r in 0..cfg.restarts {
        let mut run = lloyd(data, cfg, cfg.rng_seed.wrapping_add(r as u64))?;
        refine_single_moves(data, &mut run, cfg.max_iters);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Renumbers cluster labels in order of first appearance.
pub fn canonical_labels(assignments: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    assignments
        .iter()
        .map(|&a| {
            let next = map.len() as u32;
            *map.entry(a).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    pub(super) fn random_data(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    /// Best refit objective over every 2-labelling with both sides non-empty.
    pub(super) fn exhaustive_two_means(data: &Array2<f64>) -> f64 {
        let n = data.nrows();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<u32> = (0..n).map(|i| (mask >> i) & 1).collect();
            let means = cluster_means(data.view(), &labels, 2);
            let obj: f64 = (0..n)
                .map(|i| sq_dist(data.row(i), means.row(labels[i] as usize)))
                .sum();
            best = best.min(obj);
        }
        best
    }

    #[test]
    fn init_with_k_equal_rows_is_permutation() {
        let data = random_data(7, 3, 1);
        let c = kmeans_init(data.view(), 7, 5).unwrap();
        let mut hits: Vec<usize> = c
            .outer_iter()
            .map(|r| (0..7).find(|&i| data.row(i) == r).unwrap())
            .collect();
        hits.sort();
        assert_eq!(hits, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn init_k1_is_a_data_row() {
        let data = random_data(10, 2, 2);
        let c = kmeans_init(data.view(), 1, 9).unwrap();
        assert!((0..10).any(|i| data.row(i) == c.row(0)));
    }

    #[test]
    fn init_deterministic() {
        let data = random_data(50, 4, 3);
        assert_eq!(
            kmeans_init(data.view(), 5, 11).unwrap(),
            kmeans_init(data.view(), 5, 11).unwrap()
        );
    }

    #[test]
    fn init_rejects_too_few_rows() {
        let data = random_data(3, 2, 4);
        assert!(kmeans_init(data.view(), 4, 0).is_err());
    }

    #[test]
    fn duplicate_rows_still_fill_every_cluster() {
        let data = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        let r = kmeans_fit(data.view(), &KMeansConfig::with_k(3)).unwrap();
        let mut sizes = [0; 3];
        r.assignments.iter().for_each(|&a| sizes[a as usize] += 1);
        assert!(sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn two_points_two_clusters() {
        let data = array![[0.0, 0.0], [10.0, 10.0]];
        let r = kmeans_fit(data.view(), &KMeansConfig::with_k(2)).unwrap();
        assert_ne!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let data = random_data(40, 3, 6);
        let r = kmeans_fit(data.view(), &KMeansConfig::with_k(1)).unwrap();
        let mean = data.mean_axis(ndarray::Axis(0)).unwrap();
        for (a, b) in r.centroids.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let var: f64 = data.var_axis(ndarray::Axis(0), 0.0).sum() * 40.0;
        assert!((r.objective - var).abs() < 1e-9 * var);
    }

    #[test]
    fn six_points_match_exhaustive_oracle() {
        let cfg = KMeansConfig {
            k: 2,
            restarts: 32,
            ..Default::default()
        };
        for seed in 0..50 {
            let data = random_data(6, 2, 100 + seed);
            let r = kmeans_fit(data.view(), &cfg).unwrap();
            let oracle = exhaustive_two_means(&data);
            assert!((r.objective - oracle).abs() <= 1e-12 * oracle.max(1.0), "seed {seed}");
        }
    }

    #[test]
    fn objective_matches_assignment() {
        let data = random_data(200, 5, 7);
        let r = kmeans_fit(data.view(), &KMeansConfig::with_k(6)).unwrap();
        let recomputed: f64 = data
            .outer_iter()
            .zip(&r.assignments)
            .map(|(row, &a)| sq_dist(row, r.centroids.row(a as usize)))
            .sum();
        assert_eq!(recomputed, r.objective);
        assert_eq!(*r.history.last().unwrap(), r.objective);
    }

    #[test]
    fn errors() {
        let data = random_data(3, 2, 8);
        assert!(kmeans_fit(data.view(), &KMeansConfig::with_k(4)).is_err());
        let mut bad = data.clone();
        bad[[0, 0]] = f64::NAN;
        assert!(kmeans_fit(bad.view(), &KMeansConfig::with_k(2)).is_err());
        assert!(kmeans_fit(data.view(), &KMeansConfig::with_k(0)).is_err());
    }

    #[test]
    fn canonical_relabel() {
        assert_eq!(canonical_labels(&[4, 4, 1, 0, 1]), vec![0, 0, 1, 2, 1]);
    }
}

