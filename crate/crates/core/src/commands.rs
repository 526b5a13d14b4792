//! Command-line front end. The `logosp` binary only calls [`main`].
//!
//! Every subcommand reads the same JSON configuration (`--config`), so one
//! file can drive both the staged commands and `run`. Per-scene files are
//! named `<scene_id>.<ext>` inside the given directories.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{DatasetManifest, FeatureSet, SceneEntry, SuperpointPartition};
use crate::error::{Error, Result, StageContext};
use crate::evaluation::{metrics_from_confusion, ConfusionMatrix, MetricReport};
use crate::geometry::{init_superpoints, InitMode};
use crate::growing::{grow_superpoints, superpoint_mean_features, GrowthSchedule};
use crate::io::{read_feature_set, read_labels, write_feature_set, write_labels};
use crate::pipeline::{load_scene, run_pipeline, scene_features, synth_scenes, FeatureSource, PipelineConfig, SynthConfig};
use crate::projection::ProjectionConfig;
use crate::spectral::{build_global_graph, expand_labels_to_points, spectral_labels};

#[derive(Debug, Parser)]
#[command(name = "logosp", version, about = "Superpoint grouping and spectral pseudo-labels for point clouds")]
pub struct Cli {
    /// JSON pipeline configuration; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (k-means, RANSAC, synthetic data).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build level-0 superpoints for every scene.
    InitSuperpoints {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<InitMode>,
        /// Indoor voxel edge in meters.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Average camera-view features onto points.
    ProjectFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, alias = "tolerance")]
        depth_tolerance: Option<f64>,
        #[arg(long)]
        min_views: Option<usize>,
    },
    /// Coarsen superpoints along the growth schedule.
    Grow {
        #[command(flatten)]
        inputs: SceneInputs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        m1: Option<usize>,
        #[arg(long = "mt", alias = "mT")]
        m_t: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Label all superpoints of the dataset through the global graph.
    SpectralLabels {
        #[command(flatten)]
        inputs: SceneInputs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        s_prime: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Also write eigenvalues, U and V as LGSPFEAT matrices here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Score predicted labels against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with known classes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        objects: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Run the whole pipeline.
    Run {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        s_prime: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SceneInputs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of per-scene superpoint ID files.
    #[arg(long)]
    pub superpoints: PathBuf,
    /// Directory of per-scene LGSPFEAT files; defaults to the manifest's
    /// features (or projection, per the config).
    #[arg(long)]
    pub features: Option<PathBuf>,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))
            .stage("config")?;
    }
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).stage("config")?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.kmeans.rng_seed = seed;
        config.init.rng_seed = seed;
    }
    match cli.command {
        Command::InitSuperpoints {
            manifest,
            out,
            mode,
            resolution,
        } => {
            if mode.is_some() {
                config.mode = mode;
            }
            if let Some(r) = resolution {
                config.init.voxel_resolution = r;
            }
            init_command(&config, &manifest, &out).stage("init-superpoints")
        }
        Command::ProjectFeatures {
            manifest,
            out,
            depth_tolerance,
            min_views,
        } => {
            let mut proj = match config.projection {
                FeatureSource::Project(p) => p,
                FeatureSource::Precomputed(_) => ProjectionConfig::default(),
            };
            proj.depth_tolerance = depth_tolerance.unwrap_or(proj.depth_tolerance);
            proj.min_views = min_views.unwrap_or(proj.min_views);
            project_command(proj, &manifest, &out).stage("project-features")
        }
        Command::Grow {
            inputs,
            out,
            m1,
            m_t,
            rounds,
        } => {
            let schedule = GrowthSchedule {
                m1: m1.unwrap_or(config.schedule.m1),
                m_t: m_t.unwrap_or(config.schedule.m_t),
                rounds: rounds.unwrap_or(config.schedule.rounds),
            };
            grow_command(&config, &inputs, schedule, &out).stage("grow")
        }
        Command::SpectralLabels {
            inputs,
            out,
            s_prime,
            classes,
            bandwidth,
            dump,
        } => {
            config.s_prime = s_prime.unwrap_or(config.s_prime);
            config.classes = classes.unwrap_or(config.classes);
            config.bandwidth = bandwidth.unwrap_or(config.bandwidth);
            spectral_command(&config, &inputs, &out, dump.as_deref()).stage("spectral-labels")
        }
        Command::Evaluate {
            pred,
            gt,
            classes,
            report,
        } => evaluate_command(&pred, &gt, classes, report.as_deref()).stage("evaluate"),
        Command::Synth {
            out,
            scenes,
            classes,
            objects,
            dim,
            separation,
            noise,
        } => {
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                scenes: scenes.unwrap_or(d.scenes),
                classes: classes.unwrap_or(d.classes),
                objects_per_scene: objects.unwrap_or(d.objects_per_scene),
                feature_dim: dim.unwrap_or(d.feature_dim),
                separation: separation.unwrap_or(d.separation),
                noise: noise.unwrap_or(d.noise),
                rng_seed: cli.seed.unwrap_or(d.rng_seed),
                ..d
            };
            let manifest = synth_scenes(&cfg, &out).stage("synth")?;
            println!("wrote {} scenes to {}", manifest.scenes.len(), out.display());
            Ok(())
        }
        Command::Run {
            manifest,
            out,
            s_prime,
            classes,
        } => {
            if let Some(m) = manifest {
                config.manifest = m;
            }
            if out.is_some() {
                config.output = out;
            }
            config.s_prime = s_prime.unwrap_or(config.s_prime);
            config.classes = classes.unwrap_or(config.classes);
            let output = run_pipeline(&config)?;
            for r in &output.report.rounds {
                match &r.metrics {
                    Some(m) => println!(
                        "round {}: {} superpoints, mIoU {:.4}, OA {:.4}, mAcc {:.4}",
                        r.round, r.superpoints, m.miou, m.oa, m.macc
                    ),
                    None => println!("round {}: {} superpoints", r.round, r.superpoints),
                }
            }
            Ok(())
        }
    }
}

fn scene_file(dir: &Path, scene_id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{scene_id}.{ext}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_partition(p: &SuperpointPartition, dir: &Path) -> Result<()> {
    let ids: Vec<i32> = p.point_to_sp.iter().map(|&s| s as i32).collect();
    write_labels(&ids, Some(p.num_superpoints), scene_file(dir, &p.scene_id, "lgsplbl"))
}

fn read_partition(dir: &Path, scene_id: &str, points: usize) -> Result<SuperpointPartition> {
    let ids = read_labels(scene_file(dir, scene_id, "lgsplbl"))?;
    if ids.len() != points {
        return Err(Error::invalid(format!(
            "scene {scene_id}: superpoint file has {} entries for {points} points",
            ids.len()
        )));
    }
    let ids = ids
        .iter()
        .map(|&s| u32::try_from(s).map_err(|_| Error::invalid(format!("scene {scene_id}: negative superpoint ID"))))
        .collect::<Result<Vec<_>>>()?;
    SuperpointPartition::new(scene_id, ids, 0)
}

fn init_command(config: &PipelineConfig, manifest: &Path, out: &Path) -> Result<()> {
    let manifest = DatasetManifest::load(manifest)?;
    create_dir(out)?;
    let init = config.init_config();
    let counts = manifest
        .scenes
        .par_iter()
        .map(|entry| {
            let scene = load_scene(entry)?;
            let p = init_superpoints(&scene.cloud, &init)?;
            write_partition(&p, out)?;
            Ok(p.num_superpoints)
        })
        .collect::<Result<Vec<_>>>()?;
    for (entry, m) in manifest.scenes.iter().zip(counts) {
        println!("{}: {m} superpoints", entry.scene_id);
    }
    Ok(())
}

fn project_command(config: ProjectionConfig, manifest: &Path, out: &Path) -> Result<()> {
    let manifest = DatasetManifest::load(manifest)?;
    create_dir(out)?;
    let source = FeatureSource::Project(config);
    manifest.scenes.par_iter().try_for_each(|entry| {
        let scene = load_scene(entry)?;
        let f = scene_features(entry, &scene.cloud, &source)?;
        write_feature_set(&f, scene_file(out, &entry.scene_id, "lgspfeat"))
    })
}

/// Loaded inputs of one scene for the superpoint-level commands.
struct SceneState {
    entry: SceneEntry,
    positions: Vec<[f64; 3]>,
    features: FeatureSet,
    partition: SuperpointPartition,
}

fn load_inputs(config: &PipelineConfig, inputs: &SceneInputs) -> Result<Vec<SceneState>> {
    let manifest = DatasetManifest::load(&inputs.manifest)?;
    manifest
        .scenes
        .par_iter()
        .map(|entry| {
            let scene = load_scene(entry)?;
            let features = match &inputs.features {
                Some(dir) => read_feature_set(scene_file(dir, &entry.scene_id, "lgspfeat"))?,
                None => scene_features(entry, &scene.cloud, &config.projection)?,
            };
            if features.rows() != scene.cloud.len() {
                return Err(Error::invalid(format!(
                    "scene {}: {} feature rows for {} points",
                    entry.scene_id,
                    features.rows(),
                    scene.cloud.len()
                )));
            }
            let partition = read_partition(&inputs.superpoints, &entry.scene_id, scene.cloud.len())?;
            Ok(SceneState {
                entry: entry.clone(),
                positions: scene.cloud.positions,
                features,
                partition,
            })
        })
        .collect()
}

fn grow_command(config: &PipelineConfig, inputs: &SceneInputs, schedule: GrowthSchedule, out: &Path) -> Result<()> {
    let targets = schedule.sequence()?;
    let mut scenes = load_inputs(config, inputs)?;
    for (t, &target) in targets.iter().enumerate() {
        let dir = out.join(format!("level_{}", t + 1));
        create_dir(&dir)?;
        scenes.par_iter_mut().try_for_each(|s| {
            let sp = superpoint_mean_features(&s.features, &s.partition)?;
            s.partition = grow_superpoints(&sp, &s.partition, &s.positions, target, &config.kmeans)?.partition;
            write_partition(&s.partition, &dir)
        })?;
        let total: usize = scenes.iter().map(|s| s.partition.num_superpoints).sum();
        println!("level {}: target {target}, {total} superpoints", t + 1);
    }
    Ok(())
}

fn spectral_command(config: &PipelineConfig, inputs: &SceneInputs, out: &Path, dump: Option<&Path>) -> Result<()> {
    let scenes = load_inputs(config, inputs)?;
    let sp_features = scenes
        .iter()
        .map(|s| superpoint_mean_features(&s.features, &s.partition))
        .collect::<Result<Vec<_>>>()?;
    let graph_input: Vec<(&str, &FeatureSet)> =
        scenes.iter().map(|s| s.entry.scene_id.as_str()).zip(&sp_features).collect();
    let graph = build_global_graph(&graph_input, config.bandwidth)?;
    let (basis, labels) = spectral_labels(&graph, config.s_prime, config.classes, &config.kmeans)?;
    let partitions: Vec<SuperpointPartition> = scenes.iter().map(|s| s.partition.clone()).collect();
    let excluded: Vec<Vec<bool>> = scenes.iter().map(|s| s.features.valid.iter().map(|v| !v).collect()).collect();
    let per_point = expand_labels_to_points(&labels.per_sp, &partitions, Some(&excluded))?;
    create_dir(out)?;
    for (s, l) in scenes.iter().zip(&per_point) {
        write_labels(l, Some(config.classes), scene_file(out, &s.entry.scene_id, "lgsplbl"))?;
    }
    if let Some(dir) = dump {
        create_dir(dir)?;
        let lambda = basis.eigenvalues.view().insert_axis(ndarray::Axis(1)).to_owned();
        let dense = |m: Array2<f64>| FeatureSet::dense(m);
        write_feature_set(&dense(lambda)?, dir.join("eigenvalues.lgspfeat"))?;
        write_feature_set(&dense(basis.u)?, dir.join("u.lgspfeat"))?;
        write_feature_set(&dense(basis.v)?, dir.join("v.lgspfeat"))?;
    }
    println!("{} superpoints labelled into {} classes", graph.len(), config.classes);
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassRow {
    class: usize,
    present: bool,
    gt_points: u64,
    iou: f64,
    accuracy: f64,
    matched_prediction: usize,
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    #[serde(flatten)]
    metrics: MetricReport,
    scenes: usize,
    ignored_points: u64,
    per_class: Vec<ClassRow>,
}

fn evaluate_command(pred: &Path, gt: &Path, classes: usize, report: Option<&Path>) -> Result<()> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(gt).map_err(|e| Error::io(gt, e))? {
        let path = entry.map_err(|e| Error::io(gt, e))?.path();
        if path.extension().is_some_and(|e| e == "lgsplbl") {
            names.push(path.file_name().expect("file entry").to_owned());
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::invalid(format!("no .lgsplbl files in {}", gt.display())));
    }
    let pairs = names
        .par_iter()
        .map(|name| Ok((read_labels(pred.join(name))?, read_labels(gt.join(name))?)))
        .collect::<Result<Vec<_>>>()?;
    let slices: Vec<(&[i32], &[i32])> = pairs.iter().map(|(p, g)| (p.as_slice(), g.as_slice())).collect();
    let cm = ConfusionMatrix::from_scenes(&slices, classes)?;
    let metrics = metrics_from_confusion(&cm)?;
    println!("OA {:.4}  mAcc {:.4}  mIoU {:.4}", metrics.oa, metrics.macc, metrics.miou);
    if let Some(path) = report {
        let mut matched = vec![0; classes];
        for (p, &g) in metrics.matching.iter().enumerate() {
            matched[g] = p;
        }
        let per_class = (0..classes)
            .map(|c| ClassRow {
                class: c,
                present: metrics.class_present[c],
                gt_points: cm.gt_total(c),
                iou: metrics.per_class_iou[c],
                accuracy: metrics.per_class_acc[c],
                matched_prediction: matched[c],
            })
            .collect();
        let report = EvaluationReport {
            metrics,
            scenes: pairs.len(),
            ignored_points: cm.ignored,
            per_class,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "logosp", "spectral-labels", "--manifest", "m.json", "--superpoints", "sp", "--out", "o", "--s-prime",
            "50", "--classes", "20", "--seed", "7",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(7));
        assert!(matches!(cli.command, Command::SpectralLabels { s_prime: Some(50), .. }));
    }

    #[test]
    fn unknown_mode_rejected() {
        assert!(Cli::try_parse_from(["logosp", "init-superpoints", "--manifest", "m", "--out", "o", "--mode", "x"]).is_err());
    }
}
