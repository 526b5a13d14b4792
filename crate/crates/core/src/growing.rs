//! Bottom-up superpoint growing.
//!
//! Each round averages point features per superpoint and clusters the
//! superpoints of one scene with K-means; every cluster becomes a larger
//! superpoint. Scenes are grown independently.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::clustering::{canonical_labels, kmeans_fit, KMeansConfig};
use crate::data::{FeatureSet, SuperpointPartition};
use crate::error::{Error, Result};

/// Superpoint counts per growth round, from `m1` down to `m_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthSchedule {
    pub m1: usize,
    #[serde(rename = "mT")]
    pub m_t: usize,
    pub rounds: usize,
}

impl Default for GrowthSchedule {
    fn default() -> Self {
        GrowthSchedule {
            m1: 80,
            m_t: 40,
            rounds: 5,
        }
    }
}

impl GrowthSchedule {
    pub fn sequence(&self) -> Result<Vec<usize>> {
        growth_schedule(self.m1, self.m_t, self.rounds)
    }
}

/// Arithmetic schedule with equal integer steps; the last step absorbs the
/// remainder. `(80, 40, 5)` gives `[80, 70, 60, 50, 40]`.
pub fn growth_schedule(m1: usize, m_t: usize, rounds: usize) -> Result<Vec<usize>> {
    if rounds == 0 {
        return Err(Error::invalid("growth schedule needs at least one round"));
    }
    if m_t == 0 || m1 < m_t {
        return Err(Error::invalid(format!("growth schedule needs m1 ≥ mT ≥ 1, got {m1}, {m_t}")));
    }
    if rounds == 1 {
        if m1 != m_t {
            return Err(Error::invalid(format!("a single round cannot go from {m1} to {m_t}")));
        }
        return Ok(vec![m1]);
    }
    let step = (m1 - m_t) / (rounds - 1);
    let mut seq: Vec<usize> = (0..rounds - 1).map(|r| m1 - r * step).collect();
    seq.push(m_t);
    Ok(seq)
}

/// Mean of the valid point features inside each superpoint, summed in
/// ascending point order. Superpoints without a valid point are masked.
pub fn superpoint_mean_features(point_features: &FeatureSet, partition: &SuperpointPartition) -> Result<FeatureSet> {
    if point_features.rows() != partition.len() {
        return Err(Error::invalid(format!(
            "scene {}: {} feature rows for {} points",
            partition.scene_id,
            point_features.rows(),
            partition.len()
        )));
    }
    let m = partition.num_superpoints;
    let mut sums = Array2::<f64>::zeros((m, point_features.dim()));
    let mut counts = vec![0usize; m];
    for (i, &sp) in partition.point_to_sp.iter().enumerate() {
        if point_features.valid[i] {
            let mut row = sums.row_mut(sp as usize);
            row += &point_features.row(i);
            counts[sp as usize] += 1;
        }
    }
    for (mut row, &c) in sums.axis_iter_mut(Axis(0)).zip(&counts) {
        if c > 0 {
            row /= c as f64;
        }
    }
    FeatureSet::new(sums, counts.iter().map(|&c| c > 0).collect())
}

/// Result of one growth step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coarsening {
    pub partition: SuperpointPartition,
    /// Old superpoint ID to new superpoint ID.
    pub sp_map: Vec<u32>,
}

/// Clusters one scene's superpoints into `min(target_m, valid superpoints)`
/// larger ones.
///
/// Superpoints whose feature row is invalid join the cluster whose geometric
/// centroid is nearest to their own. New IDs follow first appearance over old
/// superpoint order.
pub fn grow_superpoints(
    sp_features: &FeatureSet,
    partition: &SuperpointPartition,
    positions: &[[f64; 3]],
    target_m: usize,
    kmeans: &KMeansConfig,
) -> Result<Coarsening> {
    let m = partition.num_superpoints;
    if target_m == 0 {
        return Err(Error::invalid("growth target must be at least 1"));
    }
    if sp_features.rows() != m {
        return Err(Error::invalid(format!(
            "scene {}: {} superpoint features for {m} superpoints",
            partition.scene_id,
            sp_features.rows()
        )));
    }
    if positions.len() != partition.len() {
        return Err(Error::invalid(format!(
            "scene {}: {} positions for {} points",
            partition.scene_id,
            positions.len(),
            partition.len()
        )));
    }
    let valid_ids: Vec<usize> = (0..m).filter(|&s| sp_features.valid[s]).collect();
    if valid_ids.is_empty() {
        return Err(Error::invalid(format!(
            "scene {}: no superpoint has a valid feature",
            partition.scene_id
        )));
    }
    let k = target_m.min(valid_ids.len());
    let valid_clusters: Vec<u32> = if k == valid_ids.len() {
        (0..k as u32).collect()
    } else {
        let data = sp_features.values.select(Axis(0), &valid_ids);
        let cfg = KMeansConfig { k, ..*kmeans };
        kmeans_fit(data.view(), &cfg)?.assignments
    };

    const UNSET: u32 = u32::MAX;
    let mut cluster = vec![UNSET; m];
    for (&s, &c) in valid_ids.iter().zip(&valid_clusters) {
        cluster[s] = c;
    }
    if valid_ids.len() < m {
        let mut sp_sum = vec![[0.0f64; 3]; m];
        let mut sp_count = vec![0usize; m];
        for (p, &s) in positions.iter().zip(&partition.point_to_sp) {
            for a in 0..3 {
                sp_sum[s as usize][a] += p[a];
            }
            sp_count[s as usize] += 1;
        }
        let mut c_sum = vec![[0.0f64; 3]; k];
        let mut c_count = vec![0usize; k];
        for &s in &valid_ids {
            let c = cluster[s] as usize;
            for a in 0..3 {
                c_sum[c][a] += sp_sum[s][a];
            }
            c_count[c] += sp_count[s];
        }
        let c_centroid: Vec<[f64; 3]> = c_sum
            .iter()
            .zip(&c_count)
            .map(|(s, &n)| s.map(|v| v / n as f64))
            .collect();
        for s in 0..m {
            if cluster[s] != UNSET {
                continue;
            }
            let g = sp_sum[s].map(|v| v / sp_count[s] as f64);
            let mut best = (0u32, f64::INFINITY);
            for (c, cc) in c_centroid.iter().enumerate() {
                let d = (g[0] - cc[0]).powi(2) + (g[1] - cc[1]).powi(2) + (g[2] - cc[2]).powi(2);
                if d < best.1 {
                    best = (c as u32, d);
                }
            }
            cluster[s] = best.0;
        }
    }
    let sp_map = canonical_labels(&cluster);
    let partition = partition.coarsen(&sp_map)?;
    Ok(Coarsening { partition, sp_map })
}

/// Level-0 partition plus every coarsening map applied since.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionHistory {
    pub base: SuperpointPartition,
    pub maps: Vec<Vec<u32>>,
}

impl PartitionHistory {
    pub fn new(base: SuperpointPartition) -> Self {
        PartitionHistory { base, maps: Vec::new() }
    }

    pub fn push(&mut self, sp_map: Vec<u32>) {
        self.maps.push(sp_map);
    }

    /// Partition at the latest level, recomposed from level 0.
    pub fn current(&self) -> Result<SuperpointPartition> {
        self.maps.iter().try_fold(self.base.clone(), |p, map| p.coarsen(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn schedules() {
        assert_eq!(growth_schedule(80, 40, 5).unwrap(), vec![80, 70, 60, 50, 40]);
        assert_eq!(growth_schedule(80, 80, 1).unwrap(), vec![80]);
        assert_eq!(growth_schedule(10, 3, 4).unwrap(), vec![10, 8, 6, 3]);
        assert!(growth_schedule(3, 10, 4).is_err());
        assert!(growth_schedule(10, 3, 0).is_err());
        assert!(growth_schedule(10, 0, 3).is_err());
    }

    #[test]
    fn mean_of_two_points() {
        let f = FeatureSet::dense(array![[1.0, 1.0], [3.0, 3.0], [7.0, 9.0]]).unwrap();
        let p = SuperpointPartition::new("s", vec![0, 0, 1], 0).unwrap();
        let m = superpoint_mean_features(&f, &p).unwrap();
        assert_eq!(m.values, array![[2.0, 2.0], [7.0, 9.0]]);
        assert!(m.all_valid());
    }

    #[test]
    fn invalid_points_skipped_and_empty_superpoints_masked() {
        let f = FeatureSet::new(array![[1.0], [100.0], [5.0]], vec![true, false, false]).unwrap();
        let p = SuperpointPartition::new("s", vec![0, 0, 1], 0).unwrap();
        let m = superpoint_mean_features(&f, &p).unwrap();
        assert_eq!(m.values[[0, 0]], 1.0);
        assert_eq!(m.valid, vec![true, false]);
    }

    #[test]
    fn mean_size_mismatch() {
        let f = FeatureSet::dense(array![[1.0]]).unwrap();
        let p = SuperpointPartition::new("s", vec![0, 0], 0).unwrap();
        assert!(superpoint_mean_features(&f, &p).is_err());
    }

    #[test]
    fn equal_features_merge() {
        let p = SuperpointPartition::new("s", vec![0, 1, 2, 3], 0).unwrap();
        let f = FeatureSet::dense(array![[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [5.0, 5.0]]).unwrap();
        let pos = vec![[0.0; 3]; 4];
        let g = grow_superpoints(&f, &p, &pos, 2, &KMeansConfig::default()).unwrap();
        assert_eq!(g.sp_map, vec![0, 1, 0, 1]);
        assert_eq!(g.partition.level, 1);
    }

    #[test]
    fn target_above_count_is_identity() {
        let p = SuperpointPartition::new("s", vec![2, 0, 1, 1], 3).unwrap();
        let f = FeatureSet::dense(array![[0.0], [1.0], [2.0]]).unwrap();
        let g = grow_superpoints(&f, &p, &[[0.0; 3]; 4], 10, &KMeansConfig::default()).unwrap();
        assert_eq!(g.sp_map, vec![0, 1, 2]);
        assert_eq!(g.partition.point_to_sp, p.point_to_sp);
        assert_eq!(g.partition.level, 4);
    }

    #[test]
    fn invalid_superpoint_follows_geometry() {
        let p = SuperpointPartition::new("s", vec![0, 1, 2, 3], 0).unwrap();
        let f = FeatureSet::new(array![[0.0], [10.0], [0.0], [10.1]], vec![true, true, false, true]).unwrap();
        let pos = vec![[0.0; 3], [5.0, 0.0, 0.0], [4.5, 0.0, 0.0], [5.2, 0.0, 0.0]];
        let g = grow_superpoints(&f, &p, &pos, 2, &KMeansConfig::default()).unwrap();
        // superpoint 2 has no feature but sits next to the 10.x cluster
        assert_eq!(g.sp_map, vec![0, 1, 1, 1]);
    }

    #[test]
    fn gaussian_blobs_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let centers = [[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 5.0, 5.0]];
        let blob: Vec<usize> = (0..12).map(|i| (i * 7) % 3).collect();
        let values = Array2::from_shape_fn((12, 3), |(r, c)| centers[blob[r]][c] + noise.sample(&mut rng));
        let f = FeatureSet::dense(values).unwrap();
        let p = SuperpointPartition::new("s", (0..12).collect(), 0).unwrap();
        let g = grow_superpoints(&f, &p, &[[0.0; 3]; 12], 3, &KMeansConfig::default()).unwrap();
        for a in 0..12 {
            for b in 0..12 {
                assert_eq!(blob[a] == blob[b], g.sp_map[a] == g.sp_map[b]);
            }
        }
    }

    #[test]
    fn history_composes() {
        let base = SuperpointPartition::new("s", vec![0, 1, 2, 3, 4, 5], 0).unwrap();
        let mut h = PartitionHistory::new(base.clone());
        let first = base.coarsen(&[0, 0, 1, 1, 2, 2]).unwrap();
        h.push(vec![0, 0, 1, 1, 2, 2]);
        h.push(vec![0, 1, 0]);
        let second = first.coarsen(&[0, 1, 0]).unwrap();
        assert_eq!(h.current().unwrap(), second);
    }
}
