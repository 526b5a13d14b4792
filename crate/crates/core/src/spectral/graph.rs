use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::data::FeatureSet;
use crate::error::{Error, Result};

/// Fully connected graph over every superpoint in the dataset.
///
/// Rows follow scene order and then local superpoint ID, so the global row of
/// superpoint `(h, s)` is `s` plus the superpoint count of all earlier scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGraph {
    /// `(scene_id, local superpoint ID)` for each global row.
    pub node_index: Vec<(String, u32)>,
    /// Stacked superpoint features, one row per node.
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub degrees: Vec<f64>,
    pub bandwidth: f64,
}

impl GlobalGraph {
    pub fn len(&self) -> usize {
        self.node_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_index.is_empty()
    }

    /// First global row of each scene, plus the total at the end.
    pub fn scene_offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for (i, w) in self.node_index.windows(2).enumerate() {
            if w[0].0 != w[1].0 {
                out.push(i + 1);
            }
        }
        out.push(self.len());
        out
    }
}

/// Builds the graph with edge weights `exp(-β‖f_i − f_j‖₂)`.
///
/// Every superpoint feature row must be valid.
pub fn build_global_graph(scenes: &[(&str, &FeatureSet)], bandwidth: f64) -> Result<GlobalGraph> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("graph bandwidth must be positive, got {bandwidth}")));
    }
    let dim = match scenes.first() {
        Some((_, f)) => f.dim(),
        None => return Err(Error::invalid("global graph needs at least one scene")),
    };
    let mut node_index = Vec::new();
    let mut views = Vec::new();
    for (scene_id, feats) in scenes {
        if feats.dim() != dim {
            return Err(Error::invalid(format!(
                "scene {scene_id}: feature dimension {} differs from {dim}",
                feats.dim()
            )));
        }
        if let Some(bad) = feats.valid.iter().position(|v| !v) {
            return Err(Error::invalid(format!(
                "scene {scene_id}: superpoint {bad} has no valid feature"
            )));
        }
        for s in 0..feats.rows() {
            node_index.push((scene_id.to_string(), s as u32));
        }
        views.push(feats.values.view());
    }
    if node_index.is_empty() {
        return Err(Error::invalid("global graph has no superpoints"));
    }
    let features = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?;
    let n = features.nrows();

    let mut flat = vec![0.0f64; n * n];
    flat.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let fi = features.row(i);
        for (j, a) in row.iter_mut().enumerate() {
            let d2: f64 = fi.iter().zip(features.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            *a = (-bandwidth * d2.sqrt()).exp();
        }
    });
    let adjacency = Array2::from_shape_vec((n, n), flat).expect("n*n buffer");
    let degrees: Vec<f64> = adjacency.rows().into_iter().map(|r| r.sum()).collect();
    Ok(GlobalGraph {
        node_index,
        features,
        adjacency,
        degrees,
        bandwidth,
    })
}

/// `L = I − D^{-1/2} A D^{-1/2}`, exactly symmetric.
pub fn normalized_laplacian(graph: &GlobalGraph) -> Array2<f64> {
    let n = graph.len();
    let d = &graph.degrees;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let off = graph.adjacency[[i, j]] / (d[i] * d[j]).sqrt();
        if i == j {
            1.0 - off
        } else {
            -off
        }
    })
}
