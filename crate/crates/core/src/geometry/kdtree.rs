//! Static 3-D kd-tree over a borrowed point slice. Splits at the index
//! median, so duplicate coordinates never unbalance it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: usize,
    end: usize,
    axis: usize,
    split: f64,
    left: usize,
    right: usize,
}

pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            axis: 0,
            split: 0.0,
            left: usize::MAX,
            right: usize::MAX,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            pts[i][axis].total_cmp(&pts[j][axis]).then(i.cmp(&j))
        });
        let split = pts[self.order[mid]][axis];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[id];
        node.axis = axis;
        node.split = split;
        node.left = left;
        node.right = right;
        id
    }

    /// The `k` nearest points to `query` (including any point at distance
    /// zero), nearest first, ties broken by lower index.
    pub fn nearest(&self, query: &[f64; 3], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.nearest_rec(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    fn nearest_rec(&self, id: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        let node = self.nodes[id];
        if node.left == usize::MAX {
            for &i in &self.order[node.start..node.end] {
                let c = Candidate {
                    dist2: dist2(q, &self.points[i]),
                    index: i,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let diff = q[node.axis] - node.split;
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.nearest_rec(near, q, k, heap);
        // Points equal to the split value may sit on either side.
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            self.nearest_rec(far, q, k, heap);
        }
    }

    /// Indices of all points with squared distance `< radius²`, ascending.
    pub fn within(&self, query: &[f64; 3], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, id: usize, q: &[f64; 3], r2: f64, out: &mut Vec<usize>) {
        let node = self.nodes[id];
        if node.left == usize::MAX {
            out.extend(
                self.order[node.start..node.end]
                    .iter()
                    .copied()
                    .filter(|&i| dist2(q, &self.points[i]) < r2),
            );
            return;
        }
        let diff = q[node.axis] - node.split;
        if diff < 0.0 || diff * diff < r2 {
            self.within_rec(node.left, q, r2, out);
        }
        if diff >= 0.0 || diff * diff < r2 {
            self.within_rec(node.right, q, r2, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    // coarse z to force many duplicate coordinates
                    (rng.random_range(0..3) as f64) * 0.1,
                ]
            })
            .collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = cloud(700, 1);
        let tree = KdTree::new(&pts);
        for q in pts.iter().step_by(37) {
            let got = tree.nearest(q, 12);
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, dist2(q, p))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(got, all[..12].to_vec());
        }
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = cloud(500, 2);
        let tree = KdTree::new(&pts);
        for q in pts.iter().step_by(23) {
            let got = tree.within(q, 0.15);
            let want: Vec<usize> = (0..pts.len()).filter(|&i| dist2(q, &pts[i]) < 0.15 * 0.15).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn identical_points() {
        let pts = vec![[1.0, 1.0, 1.0]; 100];
        let tree = KdTree::new(&pts);
        let nn = tree.nearest(&[1.0, 1.0, 1.0], 5);
        assert_eq!(nn.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(tree.within(&[1.0, 1.0, 1.0], 0.1).len(), 100);
    }
}
