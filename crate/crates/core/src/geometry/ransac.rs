use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normals::{canonical_sign, plane_fit};
use crate::error::{Error, Result};

/// Plane `normal · x + offset = 0` with the indices of the points within the
/// fitting distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub normal: [f64; 3],
    pub offset: f64,
    pub inlier_ids: Vec<usize>,
}

impl PlaneModel {
    pub fn distance(&self, p: &[f64; 3]) -> f64 {
        (self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.offset).abs()
    }
}

fn inliers(positions: &[[f64; 3]], normal: &[f64; 3], offset: f64, distance: f64) -> Vec<usize> {
    positions
        .iter()
        .enumerate()
        .filter(|(_, p)| (normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] + offset).abs() <= distance)
        .map(|(i, _)| i)
        .collect()
}

/// Single dominant plane by RANSAC over random point triples, refit by total
/// least squares on the winning inliers. The returned inliers are recomputed
/// against the refit plane.
pub fn ransac_plane(positions: &[[f64; 3]], distance: f64, iters: usize, rng_seed: u64) -> Result<PlaneModel> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::invalid(format!("RANSAC needs N ≥ 3 points, got {n}")));
    }
    if !(distance > 0.0) {
        return Err(Error::invalid(format!("RANSAC distance must be positive, got {distance}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<([f64; 3], f64, usize)> = None;
    for _ in 0..iters {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut c = rng.random_range(0..n - 2);
        for taken in [a.min(b), a.max(b)] {
            if c >= taken {
                c += 1;
            }
        }
        let (pa, pb, pc) = (positions[a], positions[b], positions[c]);
        let u = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
        let v = [pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]];
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let scale = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(len > 1e-12 * scale) {
            continue;
        }
        let normal = cross.map(|x| x / len);
        let offset = -(normal[0] * pa[0] + normal[1] * pa[1] + normal[2] * pa[2]);
        let count = positions
            .iter()
            .filter(|p| (normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] + offset).abs() <= distance)
            .count();
        if best.is_none_or(|b| count > b.2) {
            best = Some((normal, offset, count));
        }
    }
    let (normal, offset, _) = best.ok_or_else(|| {
        Error::invalid(format!("RANSAC: all {iters} sampled triples were collinear"))
    })?;

    let first = inliers(positions, &normal, offset, distance);
    let (normal, offset) = match plane_fit(first.iter().map(|&i| &positions[i])) {
        Some((fit, _)) => {
            let m = first.len() as f64;
            let mut c = [0.0; 3];
            for &i in &first {
                for a in 0..3 {
                    c[a] += positions[i][a];
                }
            }
            let c = c.map(|v| v / m);
            (fit, -(fit[0] * c[0] + fit[1] * c[1] + fit[2] * c[2]))
        }
        None => (normal, offset),
    };
    let flipped = canonical_sign(normal);
    let offset = if flipped == normal { offset } else { -offset };
    let inlier_ids = inliers(positions, &flipped, offset, distance);
    Ok(PlaneModel {
        normal: flipped,
        offset,
        inlier_ids,
    })
}
