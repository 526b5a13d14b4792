use std::collections::HashMap;

use crate::data::PointCloud;
use crate::error::{Error, Result};

/// Collapses every occupied voxel of edge `size` to the centroid of its
/// points (colors averaged too). Voxels are numbered by first occurrence, and
/// the returned map sends each original point to its voxel's row in the
/// downsampled cloud. Ground truth is not carried over.
pub fn voxel_downsample(cloud: &PointCloud, size: f64) -> Result<(PointCloud, Vec<usize>)> {
    if !(size > 0.0) || !size.is_finite() {
        return Err(Error::invalid(format!("voxel size must be positive, got {size}")));
    }
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut sums: Vec<([f64; 3], [f64; 3], usize)> = Vec::new();
    let mut map = Vec::with_capacity(cloud.len());
    for (p, c) in cloud.positions.iter().zip(&cloud.colors) {
        let key = p.map(|v| (v / size).floor() as i64);
        let next = sums.len();
        let slot = *index.entry(key).or_insert(next);
        if slot == next {
            sums.push(([0.0; 3], [0.0; 3], 0));
        }
        let (ps, cs, n) = &mut sums[slot];
        for a in 0..3 {
            ps[a] += p[a];
            cs[a] += c[a];
        }
        *n += 1;
        map.push(slot);
    }
    let (positions, colors) = sums
        .into_iter()
        .map(|(ps, cs, n)| {
            let n = n as f64;
            (ps.map(|v| v / n), cs.map(|v| (v / n).clamp(0.0, 1.0)))
        })
        .unzip();
    let down = PointCloud::new(cloud.scene_id.clone(), positions, colors, None)?;
    Ok((down, map))
}

/// Expands per-sample values back to the original points.
pub fn expand_to_points<T: Copy>(per_sample: &[T], map: &[usize]) -> Vec<T> {
    map.iter().map(|&s| per_sample[s]).collect()
}
