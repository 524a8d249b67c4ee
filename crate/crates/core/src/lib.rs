//! Numerical bounds on the topological entropy of geodesic flows, and the
//! Betti-number obstructions to Einstein metrics of non-negative sectional
//! curvature that follow from them.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod manifold;
pub mod numfmt;
pub mod topology;

pub use error::{Error, Result};

/// Library version, echoed into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
