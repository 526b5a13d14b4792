//! Lifting per-pixel image features onto 3-D points.
//!
//! Each point is projected through a pinhole camera. It picks up the feature
//! of the cell under its pixel only when it lies in front of the camera and
//! agrees with the depth image within a tolerance, which rejects occluded
//! points. Features from all views that see a point are averaged.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4, Vector3};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, PointCloud};
use crate::error::{Error, Result};
use crate::io::{read_depth_map, read_feature_set, DepthMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    /// Meters between a point's camera depth and the depth image reading.
    pub depth_tolerance: f64,
    pub min_views: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            depth_tolerance: 0.05,
            min_views: 1,
        }
    }
}

/// One calibrated RGB-D frame with its feature map.
///
/// The feature map has `ceil(width/stride) × ceil(height/stride)` rows in
/// row-major cell order; pixel `(u, v)` reads cell `(u/stride, v/stride)`.
#[derive(Debug, Clone)]
pub struct CameraView {
    pub intrinsics: Matrix3<f64>,
    /// Camera-to-world rigid transform.
    pub extrinsics: Matrix4<f64>,
    pub depth: DepthMap,
    pub features: FeatureSet,
    pub stride: u32,
    world_to_camera: Matrix4<f64>,
}

/// On-disk camera description; paths are relative to the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub intrinsics: [f64; 9],
    pub extrinsics: [f64; 16],
    pub depth: PathBuf,
    pub features: PathBuf,
    pub stride: u32,
}

impl CameraView {
    pub fn new(
        intrinsics: Matrix3<f64>,
        extrinsics: Matrix4<f64>,
        depth: DepthMap,
        features: FeatureSet,
        stride: u32,
    ) -> Result<Self> {
        let (fx, fy) = (intrinsics[(0, 0)], intrinsics[(1, 1)]);
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid(format!("camera: focal lengths must be positive, got {fx}, {fy}")));
        }
        if intrinsics.row(2).iter().zip([0.0, 0.0, 1.0]).any(|(a, b)| *a != b) {
            return Err(Error::invalid("camera: intrinsics last row must be [0, 0, 1]"));
        }
        if extrinsics.row(3).iter().zip([0.0, 0.0, 0.0, 1.0]).any(|(a, b)| *a != b) {
            return Err(Error::invalid("camera: extrinsics last row must be [0, 0, 0, 1]"));
        }
        let rot: Matrix3<f64> = extrinsics.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho = (rot.transpose() * rot - Matrix3::identity()).abs().max();
        if ortho > 1e-6 {
            return Err(Error::invalid(format!("camera: rotation not orthonormal (max |RᵀR−I| = {ortho:e})")));
        }
        if rot.determinant() <= 0.0 {
            return Err(Error::invalid("camera: rotation determinant must be +1"));
        }
        if stride == 0 {
            return Err(Error::invalid("camera: stride must be at least 1"));
        }
        let cells = depth.width.div_ceil(stride) as usize * depth.height.div_ceil(stride) as usize;
        if features.rows() != cells {
            return Err(Error::invalid(format!(
                "camera: feature map has {} cells, {}x{} image at stride {stride} needs {cells}",
                features.rows(),
                depth.width,
                depth.height
            )));
        }
        let t = extrinsics.fixed_view::<3, 1>(0, 3).into_owned();
        let mut world_to_camera = Matrix4::identity();
        world_to_camera.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot.transpose());
        world_to_camera.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(rot.transpose() * t)));
        Ok(CameraView {
            intrinsics,
            extrinsics,
            depth,
            features,
            stride,
            world_to_camera,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json: CameraJson = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let depth = read_depth_map(base.join(&json.depth))?;
        let features = read_feature_set(base.join(&json.features))?;
        Self::new(
            Matrix3::from_row_slice(&json.intrinsics),
            Matrix4::from_row_slice(&json.extrinsics),
            depth,
            features,
            json.stride,
        )
        .map_err(|e| Error::parse(path, e.to_string()))
    }

    fn cell_columns(&self) -> usize {
        self.depth.width.div_ceil(self.stride) as usize
    }
}

/// Feature-map row hit by each point, `None` when the point falls outside the
/// image, lies behind the camera, lands on a zero depth reading, or is
/// occluded.
pub fn project_view(cloud: &PointCloud, view: &CameraView, config: &ProjectionConfig) -> Vec<Option<usize>> {
    let (w, h) = (view.depth.width as f64, view.depth.height as f64);
    let stride = view.stride as usize;
    cloud
        .positions
        .iter()
        .map(|p| {
            let cam = view.world_to_camera.transform_point(&nalgebra::Point3::from(*p));
            let z = cam.z;
            if !(z > 0.0) {
                return None;
            }
            let uvw = view.intrinsics * Vector3::new(cam.x, cam.y, z);
            let (u, v) = ((uvw.x / uvw.z + 0.5).floor(), (uvw.y / uvw.z + 0.5).floor());
            if !(u >= 0.0 && u < w && v >= 0.0 && v < h) {
                return None;
            }
            let (u, v) = (u as usize, v as usize);
            let reading = view.depth.meters_at(u, v)?;
            if (z - reading).abs() > config.depth_tolerance {
                return None;
            }
            Some((v / stride) * view.cell_columns() + u / stride)
        })
        .collect()
}

/// Mean feature over all views that see each point. Rows seen by fewer than
/// `min_views` views are masked invalid. Views are projected in parallel but
/// summed in view order.
pub fn aggregate_views(cloud: &PointCloud, views: &[CameraView], config: &ProjectionConfig) -> Result<FeatureSet> {
    let first = views.first().ok_or_else(|| Error::invalid("feature projection needs at least one view"))?;
    if !(config.depth_tolerance > 0.0) {
        return Err(Error::invalid("depth_tolerance must be positive"));
    }
    let dim = first.features.dim();
    if let Some(bad) = views.iter().position(|v| v.features.dim() != dim) {
        return Err(Error::invalid(format!(
            "view {bad} has feature dim {}, view 0 has {dim}",
            views[bad].features.dim()
        )));
    }
    let hits: Vec<Vec<Option<usize>>> = views.par_iter().map(|v| project_view(cloud, v, config)).collect();

    let n = cloud.len();
    let mut sums = Array2::<f64>::zeros((n, dim));
    let mut counts = vec![0usize; n];
    for (view, view_hits) in views.iter().zip(&hits) {
        for (i, hit) in view_hits.iter().enumerate() {
            let Some(cell) = *hit else { continue };
            if !view.features.valid[cell] {
                continue;
            }
            let mut row = sums.row_mut(i);
            row += &view.features.row(cell);
            counts[i] += 1;
        }
    }
    let need = config.min_views.max(1);
    let valid: Vec<bool> = counts.iter().map(|&c| c >= need).collect();
    for ((mut row, &c), &ok) in sums.outer_iter_mut().zip(&counts).zip(&valid) {
        if ok {
            row /= c as f64;
        } else {
            row.fill(0.0);
        }
    }
    FeatureSet::new(sums, valid)
}
