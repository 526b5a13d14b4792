use super::kdtree::KdTree;
use crate::data::SuperpointPartition;
use crate::error::{Error, Result};

/// Connected components over `remaining_ids` of the graph joining points
/// closer than `distance`. Points outside `remaining_ids` (the ground plane
/// in outdoor mode) form one extra superpoint of their own. IDs follow first
/// appearance in point order.
pub fn euclidean_cluster(
    scene_id: &str,
    positions: &[[f64; 3]],
    remaining_ids: &[usize],
    distance: f64,
) -> Result<SuperpointPartition> {
    if !(distance > 0.0) {
        return Err(Error::invalid(format!("cluster distance must be positive, got {distance}")));
    }
    if let Some(&bad) = remaining_ids.iter().find(|&&i| i >= positions.len()) {
        return Err(Error::invalid(format!("point index {bad} out of range")));
    }
    let subset: Vec<[f64; 3]> = remaining_ids.iter().map(|&i| positions[i]).collect();
    let tree = KdTree::new(&subset);
    let mut parent: Vec<usize> = (0..subset.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, p) in subset.iter().enumerate() {
        for b in tree.within(p, distance) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    // None = not in the remaining set
    let mut keys: Vec<Option<usize>> = vec![None; positions.len()];
    for (a, &i) in remaining_ids.iter().enumerate() {
        keys[i] = Some(find(&mut parent, a));
    }
    SuperpointPartition::from_groups(scene_id, &keys, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blobs() {
        let mut pts = vec![[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [0.0, 0.05, 0.0]];
        pts.extend([[1.0, 0.0, 0.0], [1.05, 0.0, 0.0]]);
        let ids: Vec<usize> = (0..5).collect();
        let p = euclidean_cluster("s", &pts, &ids, 0.2).unwrap();
        assert_eq!(p.point_to_sp, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn chain_is_one_cluster() {
        let pts: Vec<[f64; 3]> = (0..30).map(|i| [i as f64 * 0.19, 0.0, 0.0]).collect();
        let ids: Vec<usize> = (0..30).collect();
        assert_eq!(euclidean_cluster("s", &pts, &ids, 0.2).unwrap().num_superpoints, 1);
    }

    #[test]
    fn excluded_points_form_their_own_superpoint() {
        let pts = vec![[0.0; 3], [5.0, 0.0, 0.0], [0.1, 0.0, 0.0], [9.0, 0.0, 0.0]];
        let p = euclidean_cluster("s", &pts, &[0, 2], 0.2).unwrap();
        assert_eq!(p.point_to_sp, vec![0, 1, 0, 1]);
    }
}
