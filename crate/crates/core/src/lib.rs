//! Geometric change detection against a 3D triangle-mesh model.
//!
//! Given a mesh of the expected scene, a batch of grayscale images and the
//! camera pose of each, the pipeline re-projects every image into its
//! neighbors through the mesh, flags pixels whose intensity cannot be
//! explained within the pose uncertainty, keeps the regions that several
//! comparisons agree on and triangulates them into 3D change ellipsoids.
//!
//! Stages:
//!
//! 1. [`motion`] drops near-duplicate frames using sparse feature tracking.
//! 2. [`inconsistency`] warps neighbors, computes gated intensity distances and
//!    extracts confirmed 2D change regions.
//! 3. [`change3d`] triangulates regions with sigma points and prunes detections
//!    close to the cameras.
//!
//! [`synthetic`] fabricates surveys with known changes; [`io`] reads and writes
//! every on-disk artifact; [`pipeline`] wires the detection stages together.

// negated float comparisons double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod change3d;
pub mod geometry;
pub mod image;
pub mod inconsistency;
pub mod io;
pub mod motion;
pub mod pipeline;
pub mod synthetic;

pub use image::GrayImage;
