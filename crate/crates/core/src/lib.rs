//! Explicit leapfrog time integration with local time-stepping for the 1D
//! wave equation on time-varying meshes, together with fully computable a
//! posteriori error bounds.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod stepper;
pub mod timegrid;

pub use error::{Error, Result};
