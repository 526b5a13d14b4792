use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::kdtree::KdTree;
use crate::error::{Error, Result};

/// Components closer to zero than this count as zero when choosing a sign.
const SIGN_TOL: f64 = 1e-9;

/// Flips `n` so its z component is positive; y then x decide when z is zero.
pub fn canonical_sign(n: [f64; 3]) -> [f64; 3] {
    let decider = [n[2], n[1], n[0]]
        .into_iter()
        .find(|c| c.abs() > SIGN_TOL)
        .unwrap_or(0.0);
    if decider < 0.0 {
        n.map(|v| -v)
    } else {
        n
    }
}

/// Unit eigenvector of the smallest eigenvalue of the scatter of `points`,
/// with the eigenvalues ascending. `None` when the points span fewer than two
/// dimensions.
pub(crate) fn plane_fit<'a>(
    points: impl Iterator<Item = &'a [f64; 3]> + Clone,
) -> Option<([f64; 3], [f64; 3])> {
    let mut mean = Vector3::zeros();
    let mut n = 0usize;
    for p in points.clone() {
        mean += Vector3::from(*p);
        n += 1;
    }
    if n < 3 {
        return None;
    }
    mean /= n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i].max(0.0));
    if values[2] <= f64::MIN_POSITIVE || values[1] <= 1e-10 * values[2] {
        return None;
    }
    let v = eig.eigenvectors.column(order[0]).normalize();
    Some(([v[0], v[1], v[2]], values))
}

/// Per-point surface normal from the covariance of its `knn` nearest
/// neighbours (the point itself included). Degenerate neighbourhoods yield
/// `None`.
pub fn estimate_normals(positions: &[[f64; 3]], knn: usize) -> Result<Vec<Option<[f64; 3]>>> {
    if knn < 3 {
        return Err(Error::invalid(format!("normal estimation needs knn ≥ 3, got {knn}")));
    }
    if positions.len() <= knn {
        return Err(Error::invalid(format!(
            "normal estimation needs more than knn={knn} points, got {}",
            positions.len()
        )));
    }
    let tree = KdTree::new(positions);
    Ok(positions
        .par_iter()
        .map(|p| {
            let nbrs = tree.nearest(p, knn);
            plane_fit(nbrs.iter().map(|&(i, _)| &positions[i])).map(|(n, _)| canonical_sign(n))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn grid(f: impl Fn(f64, f64) -> [f64; 3]) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for i in 0..15 {
            for j in 0..15 {
                out.push(f(i as f64 * 0.1, j as f64 * 0.1));
            }
        }
        out
    }

    #[test]
    fn horizontal_plane() {
        let pts = grid(|a, b| [a, b, 0.0]);
        for n in estimate_normals(&pts, 10).unwrap() {
            let n = n.unwrap();
            assert!((n[2] - 1.0).abs() < 1e-12, "{n:?}");
        }
    }

    #[test]
    fn plane_x_zero_points_along_positive_x() {
        let pts = grid(|a, b| [0.0, a, b]);
        for n in estimate_normals(&pts, 10).unwrap() {
            let n = n.unwrap();
            assert!((n[0] - 1.0).abs() < 1e-12, "{n:?}");
        }
    }

    #[test]
    fn collinear_neighbourhood_invalid() {
        let pts: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, 0.0, 0.0]).collect();
        assert!(estimate_normals(&pts, 5).unwrap().iter().all(Option::is_none));
    }

    #[test]
    fn noisy_sphere_is_radial() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let pts: Vec<[f64; 3]> = (0..3000)
            .map(|_| {
                let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(&mut rng));
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                v.map(|c| c / len * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let normals = estimate_normals(&pts, 20).unwrap();
        let good = pts
            .iter()
            .zip(&normals)
            .filter(|(p, n)| {
                let Some(n) = n else { return false };
                let len = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let cos = (p[0] * n[0] + p[1] * n[1] + p[2] * n[2]).abs() / len;
                cos >= 10f64.to_radians().cos()
            })
            .count();
        assert!(good as f64 >= 0.95 * pts.len() as f64, "{good}");
    }

    #[test]
    fn preconditions() {
        let pts = grid(|a, b| [a, b, 0.0]);
        assert!(estimate_normals(&pts, 2).is_err());
        assert!(estimate_normals(&pts[..5], 5).is_err());
    }

    #[test]
    fn sign_rule() {
        assert_eq!(canonical_sign([0.0, 0.0, -1.0]), [0.0, 0.0, 1.0]);
        assert_eq!(canonical_sign([0.3, -0.5, 0.0]), [-0.3, 0.5, 0.0]);
        assert_eq!(canonical_sign([-1.0, 0.0, 0.0]), [1.0, 0.0, 0.0]);
    }
}
