//! Dataset-wide pseudo-labels from the graph Fourier basis of the global
//! superpoint graph.
//!
//! The eigenvectors of the normalized Laplacian act as global patterns.
//! Superpoint features are transformed into that basis, patterns whose
//! frequency responses agree are averaged together, and superpoints are then
//! clustered on the averaged patterns.

mod eigen;
mod graph;

pub use eigen::{eigendecompose, Eigen};
pub use graph::{build_global_graph, normalized_laplacian, GlobalGraph};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::clustering::{canonical_labels, kmeans_fit, KMeansConfig};
use crate::data::{LabelAssignment, SuperpointPartition, IGNORE_LABEL};
use crate::error::{Error, Result};

/// Frequency-domain features `Uᵀ·F`; row `s` is the response of pattern `s`.
pub fn gft(u: ArrayView2<'_, f64>, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if u.nrows() != features.nrows() {
        return Err(Error::invalid(format!(
            "gft: basis has {} rows but features have {}",
            u.nrows(),
            features.nrows()
        )));
    }
    Ok(u.t().dot(&features))
}

/// Inverse transform `U·F_freq`.
pub fn inverse_gft(u: ArrayView2<'_, f64>, freq: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if u.ncols() != freq.nrows() {
        return Err(Error::invalid(format!(
            "inverse gft: basis has {} columns but spectrum has {} rows",
            u.ncols(),
            freq.nrows()
        )));
    }
    Ok(u.dot(&freq))
}

/// Eigenvectors grouped into `s_prime` averaged patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGroups {
    /// Group of each eigenvector; groups are numbered by their lowest
    /// eigenvector index.
    pub assignments: Vec<u32>,
    /// `S × s_prime`; column `g` is the mean of the eigenvectors in group `g`.
    pub v: Array2<f64>,
}

/// K-means over the rows of `freq`, then averages each group's eigenvectors.
pub fn group_patterns(
    u: ArrayView2<'_, f64>,
    freq: ArrayView2<'_, f64>,
    s_prime: usize,
    kmeans: &KMeansConfig,
) -> Result<PatternGroups> {
    let s = u.ncols();
    if freq.nrows() != s {
        return Err(Error::invalid(format!(
            "group_patterns: {} frequency rows for {s} eigenvectors",
            freq.nrows()
        )));
    }
    if s_prime == 0 || s_prime > s {
        return Err(Error::invalid(format!(
            "group_patterns: S' = {s_prime} must lie in [1, {s}]"
        )));
    }
    let raw = if s_prime == s {
        (0..s as u32).collect()
    } else {
        kmeans_fit(freq, &KMeansConfig { k: s_prime, ..*kmeans })?.assignments
    };
    let assignments = canonical_labels(&raw);
    let groups = assignments.iter().max().map_or(0, |&g| g as usize + 1);
    let mut v = Array2::<f64>::zeros((u.nrows(), groups));
    let mut counts = vec![0usize; groups];
    for (c, &g) in assignments.iter().enumerate() {
        let mut col = v.column_mut(g as usize);
        col += &u.column(c);
        counts[g as usize] += 1;
    }
    for (mut col, &w) in v.axis_iter_mut(Axis(1)).zip(&counts) {
        col /= w as f64;
    }
    Ok(PatternGroups { assignments, v })
}

/// K-means with `classes` clusters over the rows of `v`.
pub fn superpoint_pseudo_labels(v: ArrayView2<'_, f64>, classes: usize, kmeans: &KMeansConfig) -> Result<LabelAssignment> {
    let s = v.nrows();
    if classes == 0 || classes > s {
        return Err(Error::invalid(format!(
            "pseudo-labels: C = {classes} must lie in [1, {s}]"
        )));
    }
    let per_sp = if classes == s {
        (0..s as u32).collect()
    } else {
        canonical_labels(&kmeans_fit(v, &KMeansConfig { k: classes, ..*kmeans })?.assignments)
    };
    LabelAssignment::new(per_sp, classes)
}

/// Everything the global step derives from the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPatternBasis {
    pub eigenvalues: Array1<f64>,
    pub u: Array2<f64>,
    pub s_prime: usize,
    pub pattern_assignments: Vec<u32>,
    pub v: Array2<f64>,
}

/// Laplacian, eigenbasis, GFT, pattern grouping and superpoint labels in one
/// call.
pub fn spectral_labels(
    graph: &GlobalGraph,
    s_prime: usize,
    classes: usize,
    kmeans: &KMeansConfig,
) -> Result<(GlobalPatternBasis, LabelAssignment)> {
    let laplacian = normalized_laplacian(graph);
    let Eigen { values, vectors } = eigendecompose(&laplacian)?;
    let freq = gft(vectors.view(), graph.features.view())?;
    let groups = group_patterns(vectors.view(), freq.view(), s_prime, kmeans)?;
    let labels = superpoint_pseudo_labels(groups.v.view(), classes, kmeans)?;
    let basis = GlobalPatternBasis {
        eigenvalues: values,
        u: vectors,
        s_prime,
        pattern_assignments: groups.assignments,
        v: groups.v,
    };
    Ok((basis, labels))
}

/// Per-point labels for each scene; `per_sp` is indexed by global graph row.
///
/// Points flagged in `excluded` (same shape as the partitions) get
/// [`IGNORE_LABEL`].
pub fn expand_labels_to_points(
    per_sp: &[u32],
    partitions: &[SuperpointPartition],
    excluded: Option<&[Vec<bool>]>,
) -> Result<Vec<Vec<i32>>> {
    let total: usize = partitions.iter().map(|p| p.num_superpoints).sum();
    if per_sp.len() != total {
        return Err(Error::invalid(format!(
            "{} superpoint labels for {total} superpoints: some superpoint is unlabeled",
            per_sp.len()
        )));
    }
    if let Some(mask) = excluded {
        if mask.len() != partitions.len() || mask.iter().zip(partitions).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::invalid("exclusion mask does not match the partitions"));
        }
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(partitions.len());
    for (h, part) in partitions.iter().enumerate() {
        let labels = part
            .point_to_sp
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if excluded.is_some_and(|m| m[h][i]) {
                    IGNORE_LABEL
                } else {
                    per_sp[offset + s as usize] as i32
                }
            })
            .collect();
        out.push(labels);
        offset += part.num_superpoints;
    }
    Ok(out)
}
