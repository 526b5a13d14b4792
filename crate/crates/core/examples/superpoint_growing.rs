//! Bottom-up growing of one scene's superpoints along the 80 → 40 schedule.

use logosp::clustering::KMeansConfig;
use logosp::growing::{grow_superpoints, growth_schedule, superpoint_mean_features, PartitionHistory};
use logosp::{FeatureSet, SuperpointPartition};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> logosp::Result<()> {
    // 120 small superpoints of 25 points each along a line; features drift
    // slowly so that neighbouring superpoints look alike.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 120 * 25;
    let positions: Vec<[f64; 3]> = (0..n).map(|i| [i as f64 * 0.01, 0.0, 0.0]).collect();
    let values = Array2::from_shape_fn((n, 4), |(i, c)| {
        let t = (i / 25) as f64 / 120.0;
        (t * (c + 1) as f64 * 3.0).sin() + rng.random_range(-0.05..0.05)
    });
    let features = FeatureSet::dense(values)?;
    let base = SuperpointPartition::new("line", (0..n).map(|i| (i / 25) as u32).collect(), 0)?;

    let schedule = growth_schedule(80, 40, 5)?;
    println!("schedule {schedule:?}");
    let mut history = PartitionHistory::new(base.clone());
    let mut current = base;
    for target in schedule {
        let sp = superpoint_mean_features(&features, &current)?;
        let step = grow_superpoints(&sp, &current, &positions, target, &KMeansConfig::default())?;
        println!(
            "level {}: {} superpoints, largest {} points",
            step.partition.level,
            step.partition.num_superpoints,
            step.partition.sizes().iter().max().unwrap_or(&0)
        );
        history.push(step.sp_map);
        current = step.partition;
    }
    println!("history recomposes the last level: {}", history.current()? == current);
    Ok(())
}
