//! Deterministic k-means on three Gaussian blobs.

use logosp::clustering::{kmeans_fit, KMeansConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> logosp::Result<()> {
    let centers = [[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]];
    let noise = Normal::new(0.0, 0.4).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = Array2::from_shape_fn((300, 2), |(r, c)| centers[r % 3][c] + noise.sample(&mut rng));

    let cfg = KMeansConfig {
        restarts: 5,
        ..KMeansConfig::with_k(3)
    };
    let fit = kmeans_fit(data.view(), &cfg)?;
    println!("objective {:.3} after {} iterations", fit.objective, fit.iters_run);
    println!("history {:?}", fit.history.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    for (k, c) in fit.centroids.rows().into_iter().enumerate() {
        let size = fit.assignments.iter().filter(|&&a| a as usize == k).count();
        println!("cluster {k}: centroid ({:.2}, {:.2}), {size} points", c[0], c[1]);
    }
    let again = kmeans_fit(data.view(), &cfg)?;
    println!("rerun identical: {}", again == fit);
    Ok(())
}
