//! Initial superpoints.
//!
//! Indoor scenes are voxel-downsampled, normals are estimated on the samples
//! and grown into regions, then region IDs are expanded back to every point.
//! Outdoor scenes take one dominant ground plane by RANSAC as a single
//! superpoint and split the rest into Euclidean clusters.

mod cluster;
mod kdtree;
mod normals;
mod ransac;
mod region_grow;
mod voxel;

pub use cluster::euclidean_cluster;
pub use kdtree::KdTree;
pub use normals::{canonical_sign, estimate_normals};
pub use ransac::{ransac_plane, PlaneModel};
pub use region_grow::region_grow;
pub use voxel::{expand_to_points, voxel_downsample};

use serde::{Deserialize, Serialize};

use crate::data::{PointCloud, SuperpointPartition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Indoor,
    Outdoor,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(InitMode::Indoor),
            "outdoor" => Ok(InitMode::Outdoor),
            other => Err(Error::invalid(format!("unknown mode '{other}' (indoor|outdoor)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub mode: InitMode,
    /// Indoor voxel edge in meters; coarser voxels give larger, less pure
    /// superpoints.
    pub voxel_resolution: f64,
    pub normal_knn: usize,
    /// Degrees.
    pub angle_threshold: f64,
    pub ransac_distance: f64,
    pub cluster_distance: f64,
    pub ransac_iters: usize,
    pub min_region_size: usize,
    pub rng_seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            mode: InitMode::Indoor,
            voxel_resolution: 0.1,
            normal_knn: 30,
            angle_threshold: 10.0,
            ransac_distance: 0.2,
            cluster_distance: 0.2,
            ransac_iters: 1000,
            min_region_size: 20,
            rng_seed: 42,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("voxel_resolution", self.voxel_resolution),
            ("angle_threshold", self.angle_threshold),
            ("ransac_distance", self.ransac_distance),
            ("cluster_distance", self.cluster_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("init config: {name} must be positive, got {v}")));
            }
        }
        if self.normal_knn < 3 {
            return Err(Error::invalid("init config: normal_knn must be at least 3"));
        }
        if self.ransac_iters == 0 {
            return Err(Error::invalid("init config: ransac_iters must be positive"));
        }
        Ok(())
    }
}

/// Level-0 superpoints for one scene according to `config.mode`.
pub fn init_superpoints(cloud: &PointCloud, config: &InitConfig) -> Result<SuperpointPartition> {
    config.validate()?;
    match config.mode {
        InitMode::Indoor => {
            let (samples, map) = voxel_downsample(cloud, config.voxel_resolution)?;
            let n = samples.len();
            // too few samples for a neighbourhood: the scene is one superpoint
            if n < 4 {
                return SuperpointPartition::new(cloud.scene_id.clone(), vec![0; cloud.len()], 0);
            }
            let knn = config.normal_knn.min(n - 1);
            let normals = estimate_normals(&samples.positions, knn)?;
            let cfg = InitConfig {
                normal_knn: knn,
                ..config.clone()
            };
            let sampled = region_grow(&cloud.scene_id, &samples.positions, &normals, &cfg)?;
            let point_to_sp = expand_to_points(&sampled.point_to_sp, &map);
            SuperpointPartition::new(cloud.scene_id.clone(), point_to_sp, 0)
        }
        InitMode::Outdoor => {
            let plane = ransac_plane(
                &cloud.positions,
                config.ransac_distance,
                config.ransac_iters,
                config.rng_seed,
            )?;
            let mut on_plane = vec![false; cloud.len()];
            plane.inlier_ids.iter().for_each(|&i| on_plane[i] = true);
            let remaining: Vec<usize> = (0..cloud.len()).filter(|&i| !on_plane[i]).collect();
            euclidean_cluster(&cloud.scene_id, &cloud.positions, &remaining, config.cluster_distance)
        }
    }
}
