//! Unsupervised point-cloud semantic pseudo-labels from local and global
//! superpoint grouping.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`geometry`] builds initial superpoints per scene (normal-based region
//!    growing indoors, ground-plane RANSAC plus Euclidean clustering outdoors).
//! 2. [`projection`] lifts per-pixel image features onto points, or features
//!    are loaded directly from LGSPFEAT files.
//! 3. [`growing`] coarsens each scene's superpoints with K-means over their
//!    mean features.
//! 4. [`spectral`] connects all superpoints of the dataset into one graph,
//!    takes the eigenvectors of its normalized Laplacian as a Fourier basis,
//!    groups basis vectors whose frequency-domain features agree, and
//!    clusters superpoints on the grouped basis to get pseudo-labels.
//!
//! [`evaluation`] scores labels with Hungarian matching, and [`pipeline`]
//! wires everything together along with a synthetic scene generator.
//!
//! See the `examples/` directory for one runnable program per stage.

pub mod clustering;
pub mod commands;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod growing;
pub mod io;
pub mod pipeline;
pub mod projection;
pub mod spectral;

pub use data::{
    DatasetManifest, FeatureSet, LabelAssignment, PointCloud, SceneEntry, SuperpointPartition,
    IGNORE_LABEL,
};
pub use error::{Error, Result};
