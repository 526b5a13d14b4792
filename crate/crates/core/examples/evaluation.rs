//! Hungarian-matched metrics and superpoint purity.

use logosp::evaluation::{compute_metrics, hungarian_match, superpoint_purity, superpoint_votes};
use logosp::SuperpointPartition;

fn main() -> logosp::Result<()> {
    println!("matching {:?}", hungarian_match(&[vec![1, 9, 0], vec![8, 1, 1], vec![0, 2, 7]])?);

    let gt = [0, 0, 1, 1, 2, 2, -1, 2];
    let pred = [2, 2, 0, 0, 1, 1, 0, 0];
    let r = compute_metrics(&pred, &gt, 3)?;
    println!(
        "OA {:.3} mAcc {:.3} mIoU {:.3}, per class {:?}, prediction -> class {:?}",
        r.oa, r.macc, r.miou, r.per_class_iou, r.matching
    );
    let r = compute_metrics(&[0, 0, 1, 1], &[0, 1, 0, 1], 2)?;
    println!("coin-flip case: OA {} mIoU {}", r.oa, r.miou);

    let fine = SuperpointPartition::new("s", vec![0, 0, 1, 1, 2, 2, 3, 3], 0)?;
    let coarse = fine.coarsen(&[0, 0, 1, 1])?;
    for (name, p) in [("fine", &fine), ("coarse", &coarse)] {
        println!(
            "{name}: votes {:?}, purity {:.3}",
            superpoint_votes(p, &gt, 3)?,
            superpoint_purity(p, &gt, 3)?
        );
    }
    Ok(())
}
