//! Generates the synthetic benchmark and runs the full pipeline on it.
//!
//! `cargo run --release --example synthetic_pipeline -- [out_dir]`

use logosp::pipeline::{run_pipeline, synth_scenes, PipelineConfig, SynthConfig};

fn main() -> logosp::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("logosp-synthetic"));
    let synth = SynthConfig::default();
    let manifest = synth_scenes(&synth, out.join("data"))?;
    println!("{} scenes, {} classes", manifest.scenes.len(), synth.classes);

    let config = PipelineConfig {
        manifest: out.join("data").join("manifest.json"),
        s_prime: 10,
        classes: synth.classes,
        output: Some(out.join("run")),
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let result = run_pipeline(&config)?;
    println!("initial superpoints: {}", result.report.initial_superpoints);
    for r in &result.report.rounds {
        let miou = r.metrics.as_ref().map_or(f64::NAN, |m| m.miou);
        println!("round {} (target {}): {} superpoints, mIoU {miou:.4}", r.round, r.target, r.superpoints);
    }
    println!("finished in {:.1?}; outputs in {}", start.elapsed(), out.join("run").display());
    Ok(())
}
