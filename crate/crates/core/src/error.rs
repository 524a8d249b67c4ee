use thiserror::Error;

use crate::manifold::ChartPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A chart point outside the domain of its chart.
    #[error("point {coords:?} lies outside the domain of chart {chart}")]
    Domain { chart: usize, coords: Vec<f64> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The trajectory left every chart; carries the last state that was still valid.
    #[error("integration stopped at t = {t}: {reason}")]
    Integration {
        t: f64,
        last_point: ChartPoint,
        last_velocity: Vec<f64>,
        reason: String,
    },

    #[error("{failures} of {total} samples failed to integrate")]
    Estimator { failures: usize, total: usize },

    #[error("invalid profile: {0}")]
    Validation(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("cannot parse manifold specification: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
