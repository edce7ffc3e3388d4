//! One-bit compressed sensing for signals on (or near) a low-dimensional
//! manifold in the unit sphere.
//!
//! The pipeline has three stages:
//!
//! 1. [`gmra`] learns a multiscale piecewise-affine dictionary from samples,
//!    using the leveled landmarks of a [`covertree::CoverTree`].
//! 2. [`measure`] draws a Gaussian ensemble and reduces a signal to the signs
//!    of its measurements.
//! 3. [`recovery`] picks the GMRA center whose sign pattern is closest to the
//!    observed bits and then solves a small convex program on that center's
//!    affine piece.
//!
//! [`widthlab`] estimates Gaussian widths for the complexity bounds, and
//! [`harness`] generates datasets and runs the reproducible experiment grid.

pub mod cloud;
pub mod covertree;
pub mod error;
pub mod gmra;
pub mod harness;
pub mod linalg;
pub mod measure;
pub mod recovery;
pub mod rng;
pub mod widthlab;

pub use cloud::PointCloud;
pub use covertree::CoverTree;
pub use error::{Error, Result};
pub use gmra::{Gmra, GmraLevel, GmraParams};
pub use measure::{BitVector, Ensemble, UnitVector};
pub use recovery::{FeasibleCap, RecoveryResult, SearchMode, Variant};
