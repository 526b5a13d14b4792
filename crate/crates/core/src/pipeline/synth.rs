//! Synthetic indoor scenes: a floor with axis-aligned open-bottom boxes on a
//! grid, mounted a little above the floor like wall cabinets. Every object
//! carries one class, and per-point features are the class mean plus Gaussian
//! noise, so the ground truth is known exactly.
//!
//! The gap under each box keeps the floor and the box walls from meeting in
//! a crease, where normal estimation would blur two classes together.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DatasetManifest, FeatureSet, PointCloud, SceneEntry};
use crate::error::{Error, Result};
use crate::io::{write_feature_set, write_labels, write_point_cloud, PlyEncoding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scenes: usize,
    pub classes: usize,
    /// Boxes per scene; the floor is one more object.
    pub objects_per_scene: usize,
    pub feature_dim: usize,
    /// L2 distance between class mean features.
    pub separation: f64,
    /// Standard deviation of the per-point feature noise.
    pub noise: f64,
    /// Surface sampling step in meters.
    pub point_spacing: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scenes: 20,
            classes: 5,
            objects_per_scene: 12,
            feature_dim: 16,
            separation: 10.0,
            noise: 0.1,
            point_spacing: 0.05,
            rng_seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.classes == 0 || self.objects_per_scene == 0 || self.feature_dim == 0 {
            return Err(Error::invalid("synth: scenes, classes, objects and feature_dim must be positive"));
        }
        if !(self.separation > 0.0) || !(self.noise >= 0.0) || !(self.point_spacing > 0.0) {
            return Err(Error::invalid("synth: separation and spacing must be positive, noise non-negative"));
        }
        if self.point_spacing > 0.1 {
            return Err(Error::invalid("synth: point_spacing above 0.1 m leaves faces too sparse"));
        }
        Ok(())
    }
}

/// Class mean vectors with pairwise L2 distance at least `separation`.
///
/// With `dim ≥ classes` the means are scaled one-hot vectors and every pair is
/// exactly `separation` apart. Otherwise random Gaussian directions are scaled
/// until the closest pair reaches `separation`.
pub fn class_means(classes: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    if dim >= classes {
        let mut m = Array2::zeros((classes, dim));
        for c in 0..classes {
            m[[c, c]] = separation / std::f64::consts::SQRT_2;
        }
        return m;
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let m = Array2::from_shape_fn((classes, dim), |_| normal.sample(rng));
    let mut closest = f64::INFINITY;
    for a in 0..classes {
        for b in 0..a {
            let d = (&m.row(a) - &m.row(b)).mapv(|x: f64| x * x).sum().sqrt();
            closest = closest.min(d);
        }
    }
    let scale = if closest > 0.0 && closest.is_finite() { separation / closest } else { separation };
    m * scale
}

struct SceneGeometry {
    positions: Vec<[f64; 3]>,
    object: Vec<usize>,
}

fn grid(from: f64, to: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(move |i| from + i as f64 * step)
}

/// Floor is object 0; box `b` is object `b + 1`.
fn scene_geometry(boxes: usize, spacing: f64, rng: &mut ChaCha8Rng) -> SceneGeometry {
    const CELL: f64 = 1.6;
    const ELEVATION: f64 = 0.4;
    let cols = (boxes as f64).sqrt().ceil() as usize;
    let rows = boxes.div_ceil(cols);
    let mut footprints = Vec::with_capacity(boxes);
    for b in 0..boxes {
        let (cx, cy) = ((b % cols) as f64 * CELL, (b / cols) as f64 * CELL);
        let sx = rng.random_range(0.5..1.0);
        let sy = rng.random_range(0.5..1.0);
        let h = rng.random_range(0.5..1.0);
        let x0 = cx + 0.3 + rng.random_range(0.0..(CELL - 0.6 - sx).max(1e-6));
        let y0 = cy + 0.3 + rng.random_range(0.0..(CELL - 0.6 - sy).max(1e-6));
        footprints.push([x0, y0, x0 + sx, y0 + sy, h]);
    }
    let mut positions = Vec::new();
    let mut object = Vec::new();
    let (fx, fy) = (cols as f64 * CELL, rows as f64 * CELL);
    for x in grid(0.0, fx, spacing) {
        for y in grid(0.0, fy, spacing) {
            positions.push([x, y, 0.0]);
            object.push(0);
        }
    }
    for (b, f) in footprints.iter().enumerate() {
        let [x0, y0, x1, y1, height] = *f;
        let h = ELEVATION + height;
        let mut push = |p: [f64; 3]| {
            positions.push(p);
            object.push(b + 1);
        };
        for x in grid(x0, x1, spacing) {
            for y in grid(y0, y1, spacing) {
                push([x, y, h]);
            }
        }
        // side walls stop one step below the top edge, which the lid owns
        for z in grid(ELEVATION, h - spacing * 0.5, spacing) {
            for x in grid(x0, x1, spacing) {
                push([x, y0, z]);
                push([x, y1, z]);
            }
            for y in grid(y0 + spacing, y1 - spacing * 0.5, spacing) {
                push([x0, y, z]);
                push([x1, y, z]);
            }
        }
    }
    SceneGeometry { positions, object }
}

/// Writes `manifest.json`, `clouds/<id>.ply` (with a `label` property),
/// `features/<id>.lgspfeat` and `gt/<id>.lgsplbl` under `out_dir`.
pub fn synth_scenes(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    config.validate()?;
    let out = out_dir.as_ref();
    for sub in ["clouds", "features", "gt"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let means = class_means(config.classes, config.feature_dim, config.separation, &mut rng);
    let noise = Normal::new(0.0, config.noise).map_err(|e| Error::invalid(format!("synth: {e}")))?;
    let mut scenes = Vec::with_capacity(config.scenes);
    for h in 0..config.scenes {
        let scene_id = format!("scene_{h:04}");
        let geo = scene_geometry(config.objects_per_scene, config.point_spacing, &mut rng);
        let mut object_class: Vec<usize> = (0..=config.objects_per_scene).map(|j| (j + h) % config.classes).collect();
        object_class.shuffle(&mut rng);
        let labels: Vec<i32> = geo.object.iter().map(|&o| object_class[o] as i32).collect();
        let n = labels.len();
        let mut values = Array2::<f64>::zeros((n, config.feature_dim));
        for (i, &l) in labels.iter().enumerate() {
            for d in 0..config.feature_dim {
                values[[i, d]] = means[[l as usize, d]] + noise.sample(&mut rng);
            }
        }
        let colors = labels
            .iter()
            .map(|&l| {
                let g = (l as f64 + 1.0) / (config.classes as f64 + 1.0);
                [g, 0.5 * g, 1.0 - g]
            })
            .collect();
        let cloud = PointCloud::new(scene_id.clone(), geo.positions, colors, Some(labels.clone()))?;
        let rel = |dir: &str, ext: &str| PathBuf::from(dir).join(format!("{scene_id}.{ext}"));
        write_point_cloud(&cloud, out.join(rel("clouds", "ply")), PlyEncoding::BinaryLittleEndian)?;
        write_feature_set(&FeatureSet::dense(values)?, out.join(rel("features", "lgspfeat")))?;
        write_labels(&labels, Some(config.classes), out.join(rel("gt", "lgsplbl")))?;
        scenes.push(SceneEntry {
            scene_id: scene_id.clone(),
            cloud: rel("clouds", "ply"),
            features: Some(rel("features", "lgspfeat")),
            views: Vec::new(),
            labels: Some(rel("gt", "lgsplbl")),
        });
    }
    let manifest = DatasetManifest { scenes };
    manifest.save(out.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_means_are_equidistant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = class_means(5, 16, 10.0, &mut rng);
        for a in 0..5 {
            for b in 0..a {
                let d = (&m.row(a) - &m.row(b)).mapv(|x: f64| x * x).sum().sqrt();
                assert!((d - 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn low_dim_means_keep_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = class_means(6, 2, 3.0, &mut rng);
        for a in 0..6 {
            for b in 0..a {
                let d = (&m.row(a) - &m.row(b)).mapv(|x: f64| x * x).sum().sqrt();
                assert!(d >= 3.0 - 1e-9);
            }
        }
    }

    #[test]
    fn scene_points_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geo = scene_geometry(5, 0.05, &mut rng);
        let objects: std::collections::BTreeSet<usize> = geo.object.iter().copied().collect();
        assert_eq!(objects.len(), 6);
        let mut seen = std::collections::HashSet::new();
        for p in &geo.positions {
            let key = p.map(|v| (v * 1000.0).round() as i64);
            assert!(seen.insert(key), "duplicate point {p:?}");
        }
    }

    #[test]
    fn zero_noise_gives_exact_class_features() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            scenes: 2,
            objects_per_scene: 2,
            noise: 0.0,
            ..Default::default()
        };
        let manifest = synth_scenes(&cfg, dir.path()).unwrap();
        let loaded = DatasetManifest::load(dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded.scenes.len(), 2);
        let entry = &loaded.scenes[0];
        let f = crate::io::read_feature_set(entry.features.as_ref().unwrap()).unwrap();
        let gt = crate::io::read_labels(entry.labels.as_ref().unwrap()).unwrap();
        let means = class_means(5, 16, 10.0, &mut ChaCha8Rng::seed_from_u64(42));
        for (i, &l) in gt.iter().enumerate() {
            for d in 0..16 {
                assert_eq!(f.values[[i, d]], means[[l as usize, d]] as f32 as f64);
            }
        }
        assert_eq!(manifest.scenes[0].scene_id, "scene_0000");
    }
}
