//! Learning tree-structured Gaussian graphical models from samples:
//! regression-based mutual-information estimators, Chow-Liu structure
//! learning, hard-instance generators, a graphical-lasso baseline, and a
//! Monte-Carlo experiment harness.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod glasso;
pub mod hard_instances;
pub mod linalg;
pub mod model;
pub mod structure;

pub use error::{Error, Result};
