use std::collections::VecDeque;

use super::kdtree::{dist2, KdTree};
use super::InitConfig;
use crate::data::SuperpointPartition;
use crate::error::{Error, Result};

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Symmetric k-nearest-neighbour graph, neighbour lists ascending.
pub(crate) fn knn_graph(positions: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    let tree = KdTree::new(positions);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); positions.len()];
    for (i, p) in positions.iter().enumerate() {
        for (j, _) in tree.nearest(p, k + 1) {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn unoriented_cos(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs()
}

/// Normal-based region growing over the kNN graph.
///
/// Points are ranked by flatness, the fraction of graph neighbours whose
/// normal lies within `angle_threshold` of their own, and seeds are taken
/// flattest first (ties by index). A region expands through neighbours whose
/// normal is within `angle_threshold` of both the point they were reached
/// from and the seed, so a region cannot bend around a crease. Points without
/// a valid normal join the region that reaches them first in a breadth-first
/// sweep over the graph; isolated ones become singletons.
pub fn region_grow(
    scene_id: &str,
    positions: &[[f64; 3]],
    normals: &[Option<[f64; 3]>],
    config: &InitConfig,
) -> Result<SuperpointPartition> {
    let n = positions.len();
    if normals.len() != n {
        return Err(Error::invalid(format!(
            "region growing: {} normals for {n} points",
            normals.len()
        )));
    }
    let valid = normals.iter().filter(|n| n.is_some()).count();
    if 2 * valid < n {
        return Err(Error::invalid(format!(
            "region growing: only {valid} of {n} points have a valid normal (need ≥ 50%)"
        )));
    }
    if n == 1 {
        return SuperpointPartition::new(scene_id, vec![0], 0);
    }
    let cos_limit = config.angle_threshold.to_radians().cos();
    let adj = knn_graph(positions, config.normal_knn.min(n - 1));
    let smooth = |a: usize, b: usize| match (normals[a], normals[b]) {
        (Some(na), Some(nb)) => unoriented_cos(&na, &nb) >= cos_limit,
        _ => false,
    };
    let flatness: Vec<f64> = (0..n)
        .map(|i| match normals[i] {
            Some(_) if !adj[i].is_empty() => adj[i].iter().filter(|&&j| smooth(i, j)).count() as f64 / adj[i].len() as f64,
            Some(_) => 1.0,
            None => -1.0,
        })
        .collect();
    let mut order: Vec<usize> = (0..n).filter(|&i| normals[i].is_some()).collect();
    order.sort_by(|&a, &b| flatness[b].total_cmp(&flatness[a]).then(a.cmp(&b)));

    let mut region = vec![UNSET; n];
    let mut next_region = 0;
    grow_from_seeds(&adj, normals, cos_limit, &order, &mut region, &mut next_region);
    flood_unassigned(&adj, &mut region);
    for r in region.iter_mut().filter(|r| **r == UNSET) {
        *r = next_region;
        next_region += 1;
    }

    merge_small_regions(positions, &adj, &mut region, next_region, config.min_region_size);
    SuperpointPartition::from_groups(scene_id, &region, 0)
}

const UNSET: usize = usize::MAX;

fn grow_from_seeds(
    adj: &[Vec<usize>],
    normals: &[Option<[f64; 3]>],
    cos_limit: f64,
    seeds: &[usize],
    region: &mut [usize],
    next_region: &mut usize,
) {
    let mut queue = VecDeque::new();
    for &seed in seeds {
        if region[seed] != UNSET {
            continue;
        }
        let seed_normal = normals[seed].expect("seeds have normals");
        region[seed] = *next_region;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            let ni = normals[i].expect("queued points have normals");
            for &j in &adj[i] {
                if region[j] != UNSET {
                    continue;
                }
                let Some(nj) = normals[j] else { continue };
                if unoriented_cos(&ni, &nj) >= cos_limit && unoriented_cos(&seed_normal, &nj) >= cos_limit {
                    region[j] = *next_region;
                    queue.push_back(j);
                }
            }
        }
        *next_region += 1;
    }
}

/// Multi-source breadth-first sweep handing each unassigned point the region
/// of the assigned neighbour that reaches it first.
fn flood_unassigned(adj: &[Vec<usize>], region: &mut [usize]) {
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&i| region[i] != UNSET).collect();
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if region[j] == UNSET {
                region[j] = region[i];
                queue.push_back(j);
            }
        }
    }
}

fn merge_small_regions(
    positions: &[[f64; 3]],
    adj: &[Vec<usize>],
    region: &mut [usize],
    regions: usize,
    min_size: usize,
) {
    let mut uf = UnionFind::new(regions);
    let mut size = vec![0usize; regions];
    for &r in region.iter() {
        size[r] += 1;
    }
    loop {
        // closest (distance², neighbour root) for every small root
        let mut best: Vec<Option<(f64, usize)>> = vec![None; regions];
        for (i, list) in adj.iter().enumerate() {
            let ri = uf.find(region[i]);
            if size[ri] >= min_size {
                continue;
            }
            for &j in list {
                let rj = uf.find(region[j]);
                if rj == ri {
                    continue;
                }
                let cand = (dist2(&positions[i], &positions[j]), rj);
                let better = match best[ri] {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
                };
                if better {
                    best[ri] = Some(cand);
                }
            }
        }
        let mut merged = false;
        for r in 0..regions {
            let Some((_, target)) = best[r] else { continue };
            let (a, b) = (uf.find(r), uf.find(target));
            if a == b || size[a] >= min_size {
                continue;
            }
            uf.parent[a] = b;
            size[b] += size[a];
            merged = true;
        }
        if !merged {
            break;
        }
    }
    for r in region.iter_mut() {
        *r = uf.find(*r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::estimate_normals;

    fn patch(f: impl Fn(f64, f64) -> [f64; 3], steps: usize) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for i in 0..steps {
            for j in 0..steps {
                out.push(f(i as f64 * 0.05, j as f64 * 0.05));
            }
        }
        out
    }

    fn grow(pts: &[[f64; 3]]) -> SuperpointPartition {
        let cfg = InitConfig::default();
        let normals = estimate_normals(pts, cfg.normal_knn).unwrap();
        region_grow("s", pts, &normals, &cfg).unwrap()
    }

    #[test]
    fn single_plane_single_region() {
        let pts = patch(|a, b| [a, b, 0.0], 20);
        assert_eq!(grow(&pts).num_superpoints, 1);
    }

    #[test]
    fn two_parallel_planes() {
        let mut pts = patch(|a, b| [a, b, 0.0], 20);
        pts.extend(patch(|a, b| [a, b, 1.0], 20));
        let p = grow(&pts);
        assert_eq!(p.num_superpoints, 2);
        assert!(p.point_to_sp[..400].iter().all(|&s| s == p.point_to_sp[0]));
        assert!(p.point_to_sp[400..].iter().all(|&s| s == p.point_to_sp[400]));
    }

    #[test]
    fn l_shape_faces_stay_apart() {
        let mut pts = patch(|a, b| [a, b, 0.0], 20);
        pts.extend(patch(|a, b| [a, 0.0, b + 0.05], 20));
        let p = grow(&pts);
        // the crease may become a thin region of its own, nothing more
        assert!(p.num_superpoints <= 3, "{}", p.num_superpoints);
        let floor_core: Vec<u32> = (0..400).filter(|i| pts[*i][1] > 0.25).map(|i| p.point_to_sp[i]).collect();
        let wall_core: Vec<u32> = (400..800).filter(|i| pts[*i][2] > 0.25).map(|i| p.point_to_sp[i]).collect();
        assert!(floor_core.iter().all(|&s| s == floor_core[0]));
        assert!(wall_core.iter().all(|&s| s == wall_core[0]));
        assert_ne!(floor_core[0], wall_core[0]);
    }

    #[test]
    fn small_faces_are_not_swallowed() {
        // a 0.6 m box face next to a large floor, sampled at 0.1 m
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pts.push([i as f64 * 0.1, j as f64 * 0.1, 0.0]);
            }
        }
        let wall_start = pts.len();
        for i in 0..7 {
            for k in 0..7 {
                pts.push([1.0 + i as f64 * 0.1, 2.0, 0.4 + k as f64 * 0.1]);
            }
        }
        let p = grow(&pts);
        let wall: Vec<u32> = p.point_to_sp[wall_start..].to_vec();
        assert!(wall.iter().all(|&s| s == wall[0]));
        assert!(p.point_to_sp[..wall_start].iter().all(|&s| s != wall[0]));
    }

    #[test]
    fn too_few_valid_normals() {
        let pts = patch(|a, b| [a, b, 0.0], 4);
        let normals = vec![None; pts.len()];
        assert!(region_grow("s", &pts, &normals, &InitConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let mut pts = patch(|a, b| [a, b, 0.3 * a], 20);
        pts.extend(patch(|a, b| [a, 1.5, b], 15));
        assert_eq!(grow(&pts), grow(&pts));
    }
}
