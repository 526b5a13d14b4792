//! Round-trips every on-disk format: PLY clouds (ASCII and binary), LGSPFEAT
//! feature matrices, LGSPLBL label vectors and LGSPDPTH depth maps.

use logosp::io::{
    read_depth_map, read_feature_set, read_labels, read_point_cloud, write_depth_map, write_feature_set,
    write_labels, write_point_cloud, DepthMap, PlyEncoding,
};
use logosp::{FeatureSet, PointCloud};
use ndarray::Array2;

fn main() -> logosp::Result<()> {
    let dir = std::env::temp_dir().join("logosp-formats");
    std::fs::create_dir_all(&dir).expect("temp dir");

    let positions: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 * 0.25, (i % 3) as f64, 1.0]).collect();
    let colors = positions.iter().map(|p| [p[0] / 2.0, 0.2, 0.8]).collect();
    let labels: Vec<i32> = (0..8).map(|i| if i == 5 { -1 } else { i % 2 }).collect();
    let cloud = PointCloud::new("demo", positions, colors, Some(labels.clone()))?;
    for (encoding, name) in [(PlyEncoding::Ascii, "demo_ascii.ply"), (PlyEncoding::BinaryLittleEndian, "demo.ply")] {
        let path = dir.join(name);
        write_point_cloud(&cloud, &path, encoding)?;
        let back = read_point_cloud(&path)?;
        println!("{name}: {} points, labels {:?}", back.len(), back.gt_labels.as_deref().unwrap_or(&[]));
    }

    let values = Array2::from_shape_fn((8, 4), |(r, c)| (r * 4 + c) as f64 * 0.5);
    let mut valid = vec![true; 8];
    valid[3] = false;
    let features = FeatureSet::new(values, valid)?;
    write_feature_set(&features, dir.join("demo.lgspfeat"))?;
    let back = read_feature_set(dir.join("demo.lgspfeat"))?;
    println!("features: {}x{}, {} valid rows", back.rows(), back.dim(), back.valid_count());

    write_labels(&labels, Some(2), dir.join("demo.lgsplbl"))?;
    println!("labels: {:?}", read_labels(dir.join("demo.lgsplbl"))?);

    let depth = DepthMap::new(4, 2, vec![1000, 1500, 0, 2000, 1200, 1200, 1200, 65535])?;
    write_depth_map(&depth, dir.join("demo.lgspdpth"))?;
    let back = read_depth_map(dir.join("demo.lgspdpth"))?;
    println!("depth at (1,0): {:?} m, at (2,0): {:?}", back.meters_at(1, 0), back.meters_at(2, 0));
    Ok(())
}
