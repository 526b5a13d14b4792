//! On-disk formats: PLY clouds plus the little-endian LGSP binary containers.

mod binary;
mod ply;

pub use binary::{
    read_depth_map, read_feature_set, read_labels, write_depth_map, write_feature_set,
    write_labels, DepthMap,
};
pub use ply::{read_point_cloud, write_point_cloud, PlyEncoding};
