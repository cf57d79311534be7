//! Geometry engine and benchmark toolkit for projective view conditioning.
//!
//! Context RGB-D views are unprojected into a world point cloud and splatted
//! into the target camera ([`conditioning`]). Because the operator only uses
//! relative camera/scene geometry, its output is unchanged by a global rigid
//! or similarity change of world frame, unlike per-pixel Plücker ray
//! encodings ([`plucker`]), whose coordinates shift non-uniformly.
//!
//! The remaining modules cover the camera-transform consistency benchmark
//! ([`bench`]), masked-image corruption for self-supervised pretraining
//! ([`corruption`]), evaluation metrics ([`metrics`]) and file formats ([`io`]).

pub mod bench;
pub mod camera;
pub mod cli;
pub mod conditioning;
pub mod corruption;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod plucker;
pub mod synthetic;
pub mod verify;

pub use camera::{Camera, Intrinsics, RigidTransform, SimilarityTransform};
pub use conditioning::{
    projective_condition, ContextView, PointCloud, ProjectionImage, RasterConfig,
};
pub use error::{Error, Result};
pub use image::{ColorImage, DepthMap, Mask};
pub use plucker::{PluckerMap, PluckerRay};
