//! Lifts 2-D feature maps from five ray-cast RGB-D views onto the points of a
//! box-on-floor scene, rejecting occluded points by depth.

use logosp::io::DepthMap;
use logosp::projection::{aggregate_views, project_view, CameraView, ProjectionConfig};
use logosp::{FeatureSet, PointCloud};
use nalgebra::{Matrix3, Matrix4, Vector3};
use ndarray::Array2;

const W: u32 = 64;
const H: u32 = 48;
const STRIDE: u32 = 4;
const BOX_MIN: [f64; 3] = [-0.5, -0.5, 0.0];
const BOX_MAX: [f64; 3] = [0.5, 0.5, 1.0];

/// Distance along a ray to the first hit on the floor (`z = 0`, |x|,|y| ≤ 3)
/// or the box.
fn cast(origin: Vector3<f64>, dir: Vector3<f64>) -> Option<f64> {
    let mut best = None::<f64>;
    if dir.z < 0.0 {
        let t = -origin.z / dir.z;
        let p = origin + dir * t;
        if p.x.abs() <= 3.0 && p.y.abs() <= 3.0 {
            best = Some(t);
        }
    }
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let (lo, hi) = ((BOX_MIN[a] - origin[a]) / dir[a], (BOX_MAX[a] - origin[a]) / dir[a]);
        t0 = t0.max(lo.min(hi));
        t1 = t1.min(lo.max(hi));
    }
    if t0 <= t1 && t0 > 0.0 {
        best = Some(best.map_or(t0, |b| b.min(t0)));
    }
    best
}

fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Matrix4<f64> {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 1>(0, 0).copy_from(&right);
    m.fixed_view_mut::<3, 1>(0, 1).copy_from(&down);
    m.fixed_view_mut::<3, 1>(0, 2).copy_from(&forward);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&eye);
    m
}

fn render(eye: Vector3<f64>, view_id: usize) -> logosp::Result<CameraView> {
    let k = Matrix3::new(50.0, 0.0, 32.0, 0.0, 50.0, 24.0, 0.0, 0.0, 1.0);
    let pose = look_at(eye, Vector3::new(0.0, 0.0, 0.3));
    let rot = pose.fixed_view::<3, 3>(0, 0).into_owned();
    let k_inv = k.try_inverse().expect("invertible intrinsics");
    let mut depth = Vec::with_capacity((W * H) as usize);
    for v in 0..H {
        for u in 0..W {
            let ray_cam = k_inv * Vector3::new(u as f64, v as f64, 1.0);
            let hit = cast(eye, rot * ray_cam.normalize());
            // Depth images store camera z, not ray length.
            let z = hit.map_or(0.0, |t| t * ray_cam.normalize().z);
            depth.push((z * 1000.0).round() as u16);
        }
    }
    let (cw, ch) = (W.div_ceil(STRIDE) as usize, H.div_ceil(STRIDE) as usize);
    let feats = Array2::from_shape_fn((cw * ch, 3), |(cell, d)| match d {
        0 => view_id as f64,
        1 => (cell % cw) as f64,
        _ => (cell / cw) as f64,
    });
    CameraView::new(k, pose, DepthMap::new(W, H, depth)?, FeatureSet::dense(feats)?, STRIDE)
}

fn main() -> logosp::Result<()> {
    let mut pts = Vec::new();
    for i in 0..=40 {
        for j in 0..=40 {
            let (a, b) = (-2.0 + i as f64 * 0.1, -2.0 + j as f64 * 0.1);
            if !(a.abs() < 0.5 && b.abs() < 0.5) {
                pts.push([a, b, 0.0]);
            }
        }
    }
    for i in 0..=10 {
        for j in 0..=10 {
            let (a, b) = (-0.5 + i as f64 * 0.1, -0.5 + j as f64 * 0.1);
            pts.push([a, b, 1.0]);
            pts.push([a, -0.5, b + 0.5]);
            pts.push([a, 0.5, b + 0.5]);
            pts.push([-0.5, a, b + 0.5]);
            pts.push([0.5, a, b + 0.5]);
        }
    }
    let cloud = PointCloud::from_positions("box", pts)?;

    let eyes = [
        Vector3::new(3.0, 0.0, 2.0),
        Vector3::new(-3.0, 0.2, 2.0),
        Vector3::new(0.1, 3.0, 2.5),
        Vector3::new(0.0, -3.0, 1.5),
        Vector3::new(2.0, 2.0, 3.0),
    ];
    let views = eyes.iter().enumerate().map(|(i, e)| render(*e, i)).collect::<logosp::Result<Vec<_>>>()?;
    let config = ProjectionConfig::default();
    for (i, view) in views.iter().enumerate() {
        let seen = project_view(&cloud, view, &config).iter().filter(|h| h.is_some()).count();
        println!("view {i}: sees {seen} of {} points", cloud.len());
    }
    let features = aggregate_views(&cloud, &views, &config)?;
    println!("{} points received a feature, {} are unseen", features.valid_count(), features.rows() - features.valid_count());

    let strict = ProjectionConfig {
        min_views: 3,
        ..config
    };
    println!("seen by at least 3 views: {}", aggregate_views(&cloud, &views, &strict)?.valid_count());
    Ok(())
}
