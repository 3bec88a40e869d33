//! Global matching and rigid registration of 3D line and plane landmarks.
//!
//! Landmarks are treated as points of the affine Grassmannian. Pairwise
//! consistency between putative correspondences is scored with a
//! rigid-motion-invariant distance, a densest-subgraph problem picks the
//! correspondences, and a closed-form solve recovers the transform.

pub mod assignment;
pub mod association;
pub mod benchmark;
pub mod error;
pub mod landmarks;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod pipeline;
pub mod registration;
pub mod solver;
pub mod synth;

pub use error::{DegenerateStage, Error, Result};
pub use nalgebra;
