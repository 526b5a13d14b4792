//! End-to-end orchestration and a synthetic dataset generator.
//!
//! [`run_pipeline`] builds initial superpoints, obtains per-point features,
//! and then for every growth round coarsens each scene, labels all
//! superpoints of the dataset through the global spectral step and expands
//! the labels back onto points. Stages are barriers; work inside a stage is
//! parallel over scenes but merged in manifest order, so results do not
//! depend on the thread count.

mod synth;

pub use synth::{synth_scenes, SynthConfig};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::KMeansConfig;
use crate::data::{DatasetManifest, FeatureSet, PointCloud, SceneEntry, SuperpointPartition};
use crate::error::{Error, Result, StageContext};
use crate::evaluation::{metrics_from_confusion, ConfusionMatrix, MetricReport};
use crate::geometry::{init_superpoints, InitConfig, InitMode};
use crate::growing::{grow_superpoints, superpoint_mean_features, GrowthSchedule};
use crate::io::{read_feature_set, read_labels, read_point_cloud, write_labels};
use crate::projection::{aggregate_views, CameraView, ProjectionConfig};
use crate::spectral::{build_global_graph, expand_labels_to_points, spectral_labels};

/// Where per-point features come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSource {
    /// Read each scene's `features` LGSPFEAT file.
    Precomputed(PrecomputedTag),
    /// Project each scene's camera views.
    Project(ProjectionConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecomputedTag {
    #[serde(rename = "features-precomputed")]
    FeaturesPrecomputed,
}

impl Default for FeatureSource {
    fn default() -> Self {
        FeatureSource::Precomputed(PrecomputedTag::FeaturesPrecomputed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    /// Overrides `init.mode` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<InitMode>,
    pub init: InitConfig,
    pub projection: FeatureSource,
    pub schedule: GrowthSchedule,
    pub s_prime: usize,
    pub classes: usize,
    /// β in the graph edge weight `exp(-β‖f_i − f_j‖₂)`.
    pub bandwidth: f64,
    /// Shared by growing, pattern grouping and pseudo-labelling. Defaults to
    /// 10 restarts: a single k-means++ start regularly lands in a poor local
    /// optimum on the grouped-pattern rows.
    pub kmeans: KMeansConfig,
    /// One directory per round holding `<scene_id>.lgspfeat` files that
    /// replace the features for that round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_round_feature_dirs: Option<Vec<PathBuf>>,
    /// Nothing is written when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::from("manifest.json"),
            mode: None,
            init: InitConfig::default(),
            projection: FeatureSource::default(),
            schedule: GrowthSchedule::default(),
            s_prime: 50,
            classes: 20,
            bandwidth: 1.0,
            kmeans: KMeansConfig {
                restarts: 10,
                ..KMeansConfig::default()
            },
            per_round_feature_dirs: None,
            output: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn init_config(&self) -> InitConfig {
        let mut init = self.init.clone();
        if let Some(mode) = self.mode {
            init.mode = mode;
        }
        init
    }

    pub fn validate(&self) -> Result<()> {
        self.init_config().validate()?;
        let rounds = self.schedule.sequence()?.len();
        if self.s_prime == 0 || self.classes == 0 {
            return Err(Error::invalid("s_prime and classes must be at least 1"));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if let Some(dirs) = &self.per_round_feature_dirs {
            if dirs.len() != rounds {
                return Err(Error::invalid(format!(
                    "per_round_feature_dirs has {} entries for {rounds} rounds",
                    dirs.len()
                )));
            }
        }
        Ok(())
    }
}

/// One scene as loaded for the pipeline.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub cloud: PointCloud,
    pub gt: Option<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub target: usize,
    /// Superpoints in the global graph.
    pub superpoints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scene_ids: Vec<String>,
    pub initial_superpoints: usize,
    pub rounds: Vec<RoundSummary>,
    /// Metrics of the final round, when ground truth is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Final per-point labels, one vector per scene in manifest order.
    pub labels: Vec<Vec<i32>>,
    /// Level-0 partitions.
    pub initial: Vec<SuperpointPartition>,
    /// Partitions after each round.
    pub levels: Vec<Vec<SuperpointPartition>>,
    pub report: PipelineReport,
}

pub fn load_scene(entry: &SceneEntry) -> Result<SceneData> {
    let cloud = read_point_cloud(&entry.cloud)?;
    let cloud = PointCloud {
        scene_id: entry.scene_id.clone(),
        ..cloud
    };
    let gt = match &entry.labels {
        Some(path) => {
            let labels = read_labels(path)?;
            if labels.len() != cloud.len() {
                return Err(Error::invalid(format!(
                    "scene {}: {} labels for {} points",
                    entry.scene_id,
                    labels.len(),
                    cloud.len()
                )));
            }
            Some(labels)
        }
        None => cloud.gt_labels.clone(),
    };
    Ok(SceneData { cloud, gt })
}

/// Per-point features of one scene from its precomputed file or its views.
pub fn scene_features(entry: &SceneEntry, cloud: &PointCloud, source: &FeatureSource) -> Result<FeatureSet> {
    let features = match source {
        FeatureSource::Precomputed(_) => {
            let path = entry.features.as_ref().ok_or_else(|| {
                Error::invalid(format!("scene {}: no precomputed features in manifest", entry.scene_id))
            })?;
            read_feature_set(path)?
        }
        FeatureSource::Project(cfg) => {
            if entry.views.is_empty() {
                return Err(Error::invalid(format!("scene {}: no camera views to project", entry.scene_id)));
            }
            let views = entry.views.iter().map(CameraView::load).collect::<Result<Vec<_>>>()?;
            aggregate_views(cloud, &views, cfg)?
        }
    };
    check_rows(&entry.scene_id, &features, cloud.len())?;
    Ok(features)
}

fn check_rows(scene_id: &str, features: &FeatureSet, points: usize) -> Result<()> {
    if features.rows() != points {
        return Err(Error::invalid(format!(
            "scene {scene_id}: {} feature rows for {points} points",
            features.rows()
        )));
    }
    Ok(())
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().stage("config")?;
    let manifest = DatasetManifest::load(&config.manifest).stage("manifest")?;
    let scenes: Vec<SceneData> = manifest.scenes.par_iter().map(load_scene).collect::<Result<_>>().stage("load")?;
    let init = config.init_config();
    let initial: Vec<SuperpointPartition> = scenes
        .par_iter()
        .map(|s| init_superpoints(&s.cloud, &init))
        .collect::<Result<_>>()
        .stage("init-superpoints")?;
    let mut features: Vec<FeatureSet> = manifest
        .scenes
        .par_iter()
        .zip(&scenes)
        .map(|(entry, s)| scene_features(entry, &s.cloud, &config.projection))
        .collect::<Result<_>>()
        .stage("features")?;

    let schedule = config.schedule.sequence().stage("grow")?;
    let scene_ids: Vec<String> = manifest.scenes.iter().map(|s| s.scene_id.clone()).collect();
    let mut current = initial.clone();
    let mut levels = Vec::new();
    let mut rounds = Vec::new();
    let mut labels = Vec::new();
    for (round, &target) in schedule.iter().enumerate() {
        if let Some(dirs) = &config.per_round_feature_dirs {
            features = scene_ids
                .par_iter()
                .zip(&scenes)
                .map(|(id, s)| {
                    let f = read_feature_set(dirs[round].join(format!("{id}.lgspfeat")))?;
                    check_rows(id, &f, s.cloud.len())?;
                    Ok(f)
                })
                .collect::<Result<_>>()
                .stage("features")?;
        }
        current = current
            .par_iter()
            .zip(&features)
            .zip(&scenes)
            .map(|((part, feats), scene)| {
                let sp = superpoint_mean_features(feats, part)?;
                Ok(grow_superpoints(&sp, part, &scene.cloud.positions, target, &config.kmeans)?.partition)
            })
            .collect::<Result<_>>()
            .stage("grow")?;
        let sp_features: Vec<FeatureSet> = current
            .par_iter()
            .zip(&features)
            .map(|(part, feats)| superpoint_mean_features(feats, part))
            .collect::<Result<_>>()
            .stage("grow")?;
        let graph_input: Vec<(&str, &FeatureSet)> = scene_ids.iter().map(|s| s.as_str()).zip(&sp_features).collect();
        let graph = build_global_graph(&graph_input, config.bandwidth).stage("spectral")?;
        let s = graph.len();
        let (_, assignment) = spectral_labels(&graph, config.s_prime.min(s), config.classes.min(s), &config.kmeans)
            .stage("spectral")?;
        let excluded: Vec<Vec<bool>> = features.iter().map(|f| f.valid.iter().map(|v| !v).collect()).collect();
        labels = expand_labels_to_points(&assignment.per_sp, &current, Some(&excluded)).stage("spectral")?;
        let metrics = evaluate(&labels, &scenes, config.classes).stage("evaluate")?;
        rounds.push(RoundSummary {
            round,
            target,
            superpoints: s,
            metrics,
        });
        levels.push(current.clone());
    }
    let report = PipelineReport {
        scene_ids,
        initial_superpoints: initial.iter().map(|p| p.num_superpoints).sum(),
        metrics: rounds.last().and_then(|r| r.metrics.clone()),
        rounds,
    };
    let out = PipelineOutput {
        labels,
        initial,
        levels,
        report,
    };
    if let Some(dir) = &config.output {
        write_outputs(&out, config.classes, dir).stage("write")?;
    }
    Ok(out)
}

/// Dataset-level metrics when every scene has ground truth.
fn evaluate(labels: &[Vec<i32>], scenes: &[SceneData], classes: usize) -> Result<Option<MetricReport>> {
    let Some(gts) = scenes.iter().map(|s| s.gt.as_deref()).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let pairs: Vec<(&[i32], &[i32])> = labels.iter().map(|l| l.as_slice()).zip(gts).collect();
    let cm = ConfusionMatrix::from_scenes(&pairs, classes)?;
    metrics_from_confusion(&cm).map(Some)
}

/// Writes `labels/`, `superpoints/level_<t>/` and `report.json` under `dir`.
pub fn write_outputs(out: &PipelineOutput, classes: usize, dir: &Path) -> Result<()> {
    let write_partitions = |sub: PathBuf, parts: &[SuperpointPartition]| -> Result<()> {
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for p in parts {
            let ids: Vec<i32> = p.point_to_sp.iter().map(|&s| s as i32).collect();
            write_labels(&ids, Some(p.num_superpoints), sub.join(format!("{}.lgsplbl", p.scene_id)))?;
        }
        Ok(())
    };
    write_partitions(dir.join("superpoints").join("level_0"), &out.initial)?;
    for (r, parts) in out.levels.iter().enumerate() {
        write_partitions(dir.join("superpoints").join(format!("level_{}", r + 1)), parts)?;
    }
    let label_dir = dir.join("labels");
    std::fs::create_dir_all(&label_dir).map_err(|e| Error::io(&label_dir, e))?;
    for (id, labels) in out.report.scene_ids.iter().zip(&out.labels) {
        write_labels(labels, Some(classes), label_dir.join(format!("{id}.lgsplbl")))?;
    }
    let report = dir.join("report.json");
    std::fs::write(&report, serde_json::to_string_pretty(&out.report)?).map_err(|e| Error::io(&report, e))
}
