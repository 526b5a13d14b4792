//! Level-0 superpoints for an indoor room and an outdoor street.

use logosp::evaluation::superpoint_purity;
use logosp::geometry::{init_superpoints, InitConfig, InitMode};
use logosp::PointCloud;

/// Floor plus two walls, labelled 0/1/2, sampled every 5 cm.
fn room() -> (PointCloud, Vec<i32>) {
    let mut pts = Vec::new();
    let mut gt = Vec::new();
    for i in 0..80 {
        for j in 0..60 {
            let (a, b) = (i as f64 * 0.05, j as f64 * 0.05);
            pts.push([a, b, 0.0]);
            gt.push(0);
            if j < 50 {
                pts.push([a, 0.0, 0.05 + b]);
                gt.push(1);
                pts.push([0.0, 0.05 + a * 0.75, 0.05 + b]);
                gt.push(2);
            }
        }
    }
    (PointCloud::from_positions("room", pts).expect("room cloud"), gt)
}

/// Ground plane with three poles.
fn street() -> PointCloud {
    let mut pts = Vec::new();
    for i in 0..100 {
        for j in 0..100 {
            pts.push([i as f64 * 0.1, j as f64 * 0.1, 0.0]);
        }
    }
    for (cx, cy) in [(2.0, 2.0), (5.0, 7.0), (8.0, 3.0)] {
        for k in 0..30 {
            for a in 0..6 {
                let t = a as f64 * std::f64::consts::TAU / 6.0;
                pts.push([cx + 0.1 * t.cos(), cy + 0.1 * t.sin(), 0.5 + k as f64 * 0.1]);
            }
        }
    }
    PointCloud::from_positions("street", pts).expect("street cloud")
}

fn main() -> logosp::Result<()> {
    let (cloud, gt) = room();
    let indoor = init_superpoints(&cloud, &InitConfig::default())?;
    println!(
        "indoor: {} points -> {} superpoints, purity {:.3}",
        cloud.len(),
        indoor.num_superpoints,
        superpoint_purity(&indoor, &gt, 3)?
    );
    for resolution in [0.05, 0.1, 0.2] {
        let cfg = InitConfig {
            voxel_resolution: resolution,
            ..Default::default()
        };
        let p = init_superpoints(&cloud, &cfg)?;
        println!("  voxel {resolution:.2} m: {} superpoints", p.num_superpoints);
    }

    let cloud = street();
    let cfg = InitConfig {
        mode: InitMode::Outdoor,
        ..Default::default()
    };
    let outdoor = init_superpoints(&cloud, &cfg)?;
    println!("outdoor: {} points -> {} superpoints, sizes {:?}", cloud.len(), outdoor.num_superpoints, outdoor.sizes());
    Ok(())
}
