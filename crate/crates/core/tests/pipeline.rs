use logosp::pipeline::{run_pipeline, synth_scenes, write_outputs, PipelineConfig, SynthConfig};
use logosp::{DatasetManifest, Error};

fn small_dataset(dir: &std::path::Path, classes: usize) -> PipelineConfig {
    let synth = SynthConfig {
        scenes: 3,
        classes,
        objects_per_scene: 5,
        feature_dim: 8,
        ..Default::default()
    };
    synth_scenes(&synth, dir.join("data")).unwrap();
    let mut cfg = PipelineConfig {
        manifest: dir.join("data/manifest.json"),
        s_prime: 6,
        classes,
        ..Default::default()
    };
    cfg.schedule.m1 = 20;
    cfg.schedule.m_t = 10;
    cfg.schedule.rounds = 3;
    cfg
}

#[test]
fn runs_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path(), 3);
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.report, b.report);
    assert_eq!(a.report.rounds.len(), 3);

    let manifest = DatasetManifest::load(&cfg.manifest).unwrap();
    for (labels, scene) in a.labels.iter().zip(&manifest.scenes) {
        let gt = logosp::io::read_labels(scene.labels.as_ref().unwrap()).unwrap();
        assert_eq!(labels.len(), gt.len());
        assert!(labels.iter().all(|&l| (0..3).contains(&l)));
    }
    let miou = a.report.metrics.as_ref().unwrap().miou;
    assert!(miou >= 0.9, "mIoU {miou}");

    write_outputs(&a, 3, &dir.path().join("out")).unwrap();
    for sub in ["labels", "superpoints/level_0", "superpoints/level_3"] {
        assert!(dir.path().join("out").join(sub).is_dir(), "{sub}");
    }
    assert!(dir.path().join("out/report.json").is_file());
}

#[test]
fn single_class_labels_everything_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_dataset(dir.path(), 1);
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.labels.iter().flatten().all(|&l| l == 0));
    assert_eq!(out.report.metrics.unwrap().miou, 1.0);
}

#[test]
fn bad_inputs_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        manifest: dir.path().join("nope.json"),
        ..Default::default()
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { .. }), "{err:?}");
    assert!(err.to_string().starts_with("[manifest]"), "{err}");

    let mut cfg = small_dataset(dir.path(), 2);
    cfg.s_prime = 0;
    assert!(run_pipeline(&cfg).is_err());
}
