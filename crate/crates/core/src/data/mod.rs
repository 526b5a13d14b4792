//! Domain types shared by every stage of the pipeline.

mod manifest;

pub use manifest::{DatasetManifest, SceneEntry};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Ground-truth / prediction value for points that are undefined or excluded.
pub const IGNORE_LABEL: i32 = -1;

/// One scene: positions in meters, colors in `[0, 1]`, optional per-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub scene_id: String,
    pub positions: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub gt_labels: Option<Vec<i32>>,
}

impl PointCloud {
    pub fn new(
        scene_id: impl Into<String>,
        positions: Vec<[f64; 3]>,
        colors: Vec<[f64; 3]>,
        gt_labels: Option<Vec<i32>>,
    ) -> Result<Self> {
        let cloud = PointCloud {
            scene_id: scene_id.into(),
            positions,
            colors,
            gt_labels,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Cloud with all colors set to mid grey.
    pub fn from_positions(scene_id: impl Into<String>, positions: Vec<[f64; 3]>) -> Result<Self> {
        let colors = vec![[0.5; 3]; positions.len()];
        Self::new(scene_id, positions, colors, None)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::invalid(format!(
                "scene {}: N ≥ 1 violated (empty point cloud)",
                self.scene_id
            )));
        }
        if self.colors.len() != n {
            return Err(Error::invalid(format!(
                "scene {}: {} colors for {} points",
                self.scene_id,
                self.colors.len(),
                n
            )));
        }
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(format!(
                "scene {}: non-finite coordinate at vertex {i}",
                self.scene_id
            )));
        }
        if let Some(i) = self
            .colors
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::invalid(format!(
                "scene {}: color outside [0,1] at vertex {i}",
                self.scene_id
            )));
        }
        if let Some(labels) = &self.gt_labels {
            if labels.len() != n {
                return Err(Error::invalid(format!(
                    "scene {}: {} labels for {} points",
                    self.scene_id,
                    labels.len(),
                    n
                )));
            }
            if let Some(i) = labels.iter().position(|&l| l < IGNORE_LABEL) {
                return Err(Error::invalid(format!(
                    "scene {}: label {} at vertex {i} is below the -1 sentinel",
                    self.scene_id, labels[i]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Dense row-major feature matrix with a per-row validity mask.
///
/// Rows are either points or superpoints depending on where the set came
/// from. Values on invalid rows carry no meaning and are kept at zero by the
/// constructors in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub values: Array2<f64>,
    pub valid: Vec<bool>,
}

impl FeatureSet {
    pub fn new(values: Array2<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.nrows() != valid.len() {
            return Err(Error::invalid(format!(
                "feature set has {} rows but mask has {} entries",
                values.nrows(),
                valid.len()
            )));
        }
        for (i, row) in values.outer_iter().enumerate() {
            if valid[i] && row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite feature on valid row {i}")));
            }
        }
        Ok(FeatureSet { values, valid })
    }

    /// All rows valid.
    pub fn dense(values: Array2<f64>) -> Result<Self> {
        let valid = vec![true; values.nrows()];
        Self::new(values, valid)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }
}

/// Per-point superpoint IDs for one scene.
///
/// IDs are dense: every value in `0..num_superpoints` is used by at least one
/// point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpointPartition {
    pub scene_id: String,
    pub point_to_sp: Vec<u32>,
    pub num_superpoints: usize,
    pub level: u32,
}

impl SuperpointPartition {
    pub fn new(scene_id: impl Into<String>, point_to_sp: Vec<u32>, level: u32) -> Result<Self> {
        let scene_id = scene_id.into();
        if point_to_sp.is_empty() {
            return Err(Error::invalid(format!("scene {scene_id}: empty partition")));
        }
        let m = point_to_sp.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut seen = vec![false; m];
        for &s in &point_to_sp {
            seen[s as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!(
                "scene {scene_id}: superpoint IDs not dense, {missing} unused below max {}",
                m - 1
            )));
        }
        Ok(SuperpointPartition {
            scene_id,
            point_to_sp,
            num_superpoints: m,
            level,
        })
    }

    /// Builds a dense partition from arbitrary group keys, numbering groups in
    /// order of first appearance over ascending point index.
    pub fn from_groups<K: Copy + Eq + std::hash::Hash>(
        scene_id: impl Into<String>,
        keys: &[K],
        level: u32,
    ) -> Result<Self> {
        let mut ids = std::collections::HashMap::new();
        let point_to_sp = keys
            .iter()
            .map(|k| {
                let next = ids.len() as u32;
                *ids.entry(*k).or_insert(next)
            })
            .collect();
        Self::new(scene_id, point_to_sp, level)
    }

    pub fn len(&self) -> usize {
        self.point_to_sp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_to_sp.is_empty()
    }

    /// Point indices of every superpoint, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_superpoints];
        for (i, &s) in self.point_to_sp.iter().enumerate() {
            out[s as usize].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_superpoints];
        for &s in &self.point_to_sp {
            out[s as usize] += 1;
        }
        out
    }

    /// Applies a superpoint-to-superpoint map, producing the next level.
    pub fn coarsen(&self, sp_map: &[u32]) -> Result<Self> {
        if sp_map.len() != self.num_superpoints {
            return Err(Error::invalid(format!(
                "scene {}: coarsening map has {} entries for {} superpoints",
                self.scene_id,
                sp_map.len(),
                self.num_superpoints
            )));
        }
        let point_to_sp = self.point_to_sp.iter().map(|&s| sp_map[s as usize]).collect();
        Self::new(self.scene_id.clone(), point_to_sp, self.level + 1)
    }
}

/// Per-superpoint class IDs over the whole dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    pub per_sp: Vec<u32>,
    pub classes: usize,
}

impl LabelAssignment {
    pub fn new(per_sp: Vec<u32>, classes: usize) -> Result<Self> {
        if let Some(bad) = per_sp.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::invalid(format!(
                "superpoint label {bad} outside [0, {classes})"
            )));
        }
        Ok(LabelAssignment { per_sp, classes })
    }
}
