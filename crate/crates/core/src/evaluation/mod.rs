//! Unsupervised segmentation metrics.
//!
//! Predicted cluster IDs carry no meaning, so they are matched one-to-one to
//! ground-truth classes with the Hungarian method before scoring.

mod hungarian;

pub use hungarian::hungarian_match;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{SuperpointPartition, IGNORE_LABEL};
use crate::error::{Error, Result};

/// Point counts by (ground truth, prediction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    /// `counts[g][p]`.
    pub counts: Vec<Vec<u64>>,
    /// Points whose ground truth is the ignore label.
    pub ignored: u64,
    /// Points with a valid ground truth but no prediction, per ground-truth
    /// class. They count as misses for that class.
    pub unpredicted: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; classes]; classes],
            ignored: 0,
            unpredicted: vec![0; classes],
        }
    }

    pub fn from_labels(pred: &[i32], gt: &[i32], classes: usize) -> Result<Self> {
        let mut cm = Self::new(classes);
        cm.accumulate(pred, gt)?;
        Ok(cm)
    }

    /// Confusion over several scenes, accumulated in parallel and merged
    /// with exact integer sums.
    pub fn from_scenes(scenes: &[(&[i32], &[i32])], classes: usize) -> Result<Self> {
        scenes
            .par_iter()
            .map(|(pred, gt)| Self::from_labels(pred, gt, classes))
            .try_reduce(|| Self::new(classes), |mut a, b| {
                a.merge(&b);
                Ok(a)
            })
    }

    pub fn accumulate(&mut self, pred: &[i32], gt: &[i32]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} ground-truth labels",
                pred.len(),
                gt.len()
            )));
        }
        let c = self.classes as i32;
        for (&p, &g) in pred.iter().zip(gt) {
            if !(g == IGNORE_LABEL || (0..c).contains(&g)) {
                return Err(Error::invalid(format!("ground-truth label {g} outside [0, {c})")));
            }
            if !(p == IGNORE_LABEL || (0..c).contains(&p)) {
                return Err(Error::invalid(format!("predicted label {p} outside [0, {c})")));
            }
            match (g, p) {
                (IGNORE_LABEL, _) => self.ignored += 1,
                (g, IGNORE_LABEL) => self.unpredicted[g as usize] += 1,
                (g, p) => self.counts[g as usize][p as usize] += 1,
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.unpredicted.iter_mut().zip(&other.unpredicted) {
            *x += y;
        }
        self.ignored += other.ignored;
    }

    /// Ground-truth points of class `g`, including unpredicted ones.
    pub fn gt_total(&self, g: usize) -> u64 {
        self.counts[g].iter().sum::<u64>() + self.unpredicted[g]
    }

    pub fn evaluable(&self) -> u64 {
        (0..self.classes).map(|g| self.gt_total(g)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub oa: f64,
    pub macc: f64,
    pub miou: f64,
    pub per_class_iou: Vec<f64>,
    pub per_class_acc: Vec<f64>,
    /// Whether the class occurs in the ground truth; absent classes are left
    /// out of the means.
    pub class_present: Vec<bool>,
    /// `matching[p]` is the ground-truth class prediction `p` was mapped to.
    pub matching: Vec<usize>,
}

/// Hungarian-matched OA, mAcc and mIoU.
pub fn compute_metrics(pred: &[i32], gt: &[i32], classes: usize) -> Result<MetricReport> {
    metrics_from_confusion(&ConfusionMatrix::from_labels(pred, gt, classes)?)
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<MetricReport> {
    // perm[g] = prediction matched to ground-truth class g
    let perm = hungarian_match(&cm.counts)?;
    score(cm, &perm)
}

/// Scores with prediction `perm[g]` standing for class `g`.
fn score(cm: &ConfusionMatrix, perm: &[usize]) -> Result<MetricReport> {
    let total = cm.evaluable();
    if total == 0 {
        return Err(Error::invalid("no evaluable points"));
    }
    let c = cm.classes;
    let col_total: Vec<u64> = (0..c).map(|p| cm.counts.iter().map(|row| row[p]).sum()).collect();
    let mut tp_sum = 0u64;
    let mut per_class_iou = vec![0.0; c];
    let mut per_class_acc = vec![0.0; c];
    let mut class_present = vec![false; c];
    let (mut iou_sum, mut acc_sum, mut present) = (0.0, 0.0, 0usize);
    for g in 0..c {
        let p = perm[g];
        let tp = cm.counts[g][p];
        let gt_total = cm.gt_total(g);
        let fn_ = gt_total - tp;
        let fp = col_total[p] - tp;
        tp_sum += tp;
        let denom = tp + fp + fn_;
        per_class_iou[g] = if denom > 0 { tp as f64 / denom as f64 } else { 0.0 };
        if gt_total > 0 {
            class_present[g] = true;
            per_class_acc[g] = tp as f64 / gt_total as f64;
            iou_sum += per_class_iou[g];
            acc_sum += per_class_acc[g];
            present += 1;
        }
    }
    let mut matching = vec![0; c];
    for (g, &p) in perm.iter().enumerate() {
        matching[p] = g;
    }
    Ok(MetricReport {
        oa: tp_sum as f64 / total as f64,
        macc: acc_sum / present as f64,
        miou: iou_sum / present as f64,
        per_class_iou,
        per_class_acc,
        class_present,
        matching,
    })
}

/// Majority ground-truth class of each superpoint, ignoring unlabeled
/// points; ties go to the smallest class. `None` for superpoints whose points
/// are all unlabeled.
pub fn superpoint_votes(partition: &SuperpointPartition, gt: &[i32], classes: usize) -> Result<Vec<Option<u32>>> {
    if gt.len() != partition.len() {
        return Err(Error::invalid(format!(
            "scene {}: {} ground-truth labels for {} points",
            partition.scene_id,
            gt.len(),
            partition.len()
        )));
    }
    let mut hist = vec![vec![0u64; classes]; partition.num_superpoints];
    for (&s, &g) in partition.point_to_sp.iter().zip(gt) {
        if g == IGNORE_LABEL {
            continue;
        }
        if g < 0 || g as usize >= classes {
            return Err(Error::invalid(format!("ground-truth label {g} outside [0, {classes})")));
        }
        hist[s as usize][g as usize] += 1;
    }
    Ok(hist
        .iter()
        .map(|h| {
            let (best, &count) = h.iter().enumerate().rev().max_by_key(|&(_, c)| c)?;
            (count > 0).then_some(best as u32)
        })
        .collect())
}

/// mIoU of the voted superpoint labels against the ground truth, without
/// matching: votes already live in the ground-truth label space.
pub fn superpoint_purity(partition: &SuperpointPartition, gt: &[i32], classes: usize) -> Result<f64> {
    let votes = superpoint_votes(partition, gt, classes)?;
    let pred: Vec<i32> = partition
        .point_to_sp
        .iter()
        .map(|&s| votes[s as usize].map_or(IGNORE_LABEL, |v| v as i32))
        .collect();
    let cm = ConfusionMatrix::from_labels(&pred, gt, classes)?;
    let identity: Vec<usize> = (0..classes).collect();
    Ok(score(&cm, &identity)?.miou)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction() {
        let gt = vec![0, 1, 2, 2, 1];
        let r = compute_metrics(&gt, &gt, 3).unwrap();
        assert_eq!((r.oa, r.macc, r.miou), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_enumerated_case() {
        let r = compute_metrics(&[0, 0, 1, 1], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(r.oa, 0.5);
        assert_eq!(r.per_class_iou, vec![1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(r.miou, 1.0 / 3.0);
    }

    #[test]
    fn ignore_and_errors() {
        let err = compute_metrics(&[0, 1], &[-1, -1], 2).unwrap_err();
        assert_eq!(err.to_string(), "no evaluable points");
        assert!(compute_metrics(&[0], &[0, 1], 2).is_err());
        assert!(compute_metrics(&[2], &[0], 2).is_err());
        assert!(compute_metrics(&[0], &[-2], 2).is_err());
        let r = compute_metrics(&[1, 1, 0], &[0, -1, 1], 2).unwrap();
        assert_eq!(r.oa, 1.0);
        assert_eq!(r.matching, vec![1, 0]);
    }

    #[test]
    fn unpredicted_points_are_misses() {
        let r = compute_metrics(&[0, -1], &[0, 0], 1).unwrap();
        assert_eq!(r.oa, 0.5);
        assert_eq!(r.per_class_iou, vec![0.5]);
    }

    #[test]
    fn absent_classes_leave_the_means() {
        let r = compute_metrics(&[0, 0, 1], &[0, 0, 1], 3).unwrap();
        assert_eq!(r.class_present, vec![true, true, false]);
        assert_eq!(r.miou, 1.0);
    }

    #[test]
    fn permutation_invariance_and_iou_below_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let c = rng.random_range(2..7);
            let gt: Vec<i32> = (0..500).map(|_| rng.random_range(-1..c)).collect();
            let pred: Vec<i32> = gt.iter().map(|&g| if rng.random_bool(0.7) && g >= 0 { g } else { rng.random_range(0..c) }).collect();
            let base = compute_metrics(&pred, &gt, c as usize).unwrap();
            let mut sigma: Vec<i32> = (0..c).collect();
            sigma.shuffle(&mut rng);
            let permuted: Vec<i32> = pred.iter().map(|&p| sigma[p as usize]).collect();
            let other = compute_metrics(&permuted, &gt, c as usize).unwrap();
            assert_eq!((base.oa, base.macc, base.miou), (other.oa, other.macc, other.miou));
            assert_eq!(base.per_class_iou, other.per_class_iou);
            for g in 0..c as usize {
                assert!(base.per_class_iou[g] <= base.per_class_acc[g]);
            }
        }
    }

    #[test]
    fn scene_merge_equals_concatenation() {
        let a = (vec![0, 1, 1, -1], vec![0, 1, 0, 1]);
        let b = (vec![1, 0, 0], vec![1, -1, 0]);
        let merged = ConfusionMatrix::from_scenes(&[(&a.0, &a.1), (&b.0, &b.1)], 2).unwrap();
        let pred: Vec<i32> = a.0.iter().chain(&b.0).copied().collect();
        let gt: Vec<i32> = a.1.iter().chain(&b.1).copied().collect();
        assert_eq!(merged, ConfusionMatrix::from_labels(&pred, &gt, 2).unwrap());
        assert_eq!(merged.ignored, 1);
    }

    #[test]
    fn votes_and_purity() {
        let p = SuperpointPartition::new("s", vec![0, 0, 0, 1, 1, 2], 0).unwrap();
        let gt = vec![0, 0, 1, 1, 0, -1];
        // superpoint 1 is a 1:1 tie and goes to class 0
        assert_eq!(superpoint_votes(&p, &gt, 2).unwrap(), vec![Some(0), Some(0), None]);
        // class 0: TP 3, FP 2, FN 0; class 1: TP 0, FN 2
        assert_eq!(superpoint_purity(&p, &gt, 2).unwrap(), (0.6 + 0.0) / 2.0);
        let pure = SuperpointPartition::new("s", vec![0, 0, 1, 1, 2, 3], 0).unwrap();
        assert_eq!(superpoint_purity(&pure, &gt, 2).unwrap(), 1.0);
    }

    #[test]
    fn three_point_vote() {
        let p = SuperpointPartition::new("s", vec![0, 0, 0], 0).unwrap();
        let gt = vec![0, 0, 1];
        let cm = ConfusionMatrix::from_labels(&[0, 0, 0], &gt, 2).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0], vec![1, 0]]);
        assert_eq!(superpoint_purity(&p, &gt, 2).unwrap(), (2.0 / 3.0) / 2.0);
    }

    /// Majority-vote mIoU can rise when superpoints merge: the merged
    /// superpoint below flips from voting B to voting A, which removes false
    /// positives from the large class B.
    #[test]
    fn purity_is_not_monotone_in_general() {
        let mut gt = vec![0; 2];
        gt.extend([1, 1, 1, 0, 0]);
        gt.extend(std::iter::repeat_n(1, 1000));
        let mut fine = vec![0u32; 2];
        fine.extend([1; 5]);
        fine.extend(std::iter::repeat_n(2, 1000));
        let fine = SuperpointPartition::new("s", fine, 0).unwrap();
        let coarse = fine.coarsen(&[0, 0, 1]).unwrap();
        let pf = superpoint_purity(&fine, &gt, 2).unwrap();
        let pc = superpoint_purity(&coarse, &gt, 2).unwrap();
        assert!(pc > pf, "{pf} {pc}");
    }
}
