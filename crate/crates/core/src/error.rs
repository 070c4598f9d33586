use std::fmt;

use thiserror::Error;

/// Where a failing dense block came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Unspecified,
    Cluster { id: usize, level: usize },
    Layer(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Unspecified => write!(f, "unspecified block"),
            Location::Cluster { id, level } => write!(f, "cluster {id} at level {level}"),
            Location::Layer(i) => write!(f, "layer {i}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("singular block ({location}): pivot {pivot} below threshold")]
    SingularBlock { pivot: usize, location: Location },

    #[error("coupling ({row}, {col}) joins clusters {left} and {right}, which are not in an ancestor relation")]
    PartitionViolation {
        row: usize,
        col: usize,
        left: usize,
        right: usize,
    },

    #[error("surface Green's function did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("lesser self-energy block {block} is not skew-Hermitian (relative deviation {deviation:e})")]
    NonSkewHermitianInput { block: usize, deviation: f64 },

    #[error("real part of lesser diagonal too large at dof {dof} (ratio {ratio:e})")]
    ResidualTooLarge { dof: usize, ratio: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),
}

impl Error {
    /// Attach a location to a singular-block error; other variants pass through.
    pub fn at(self, location: Location) -> Self {
        match self {
            Error::SingularBlock { pivot, .. } => Error::SingularBlock { pivot, location },
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularBlock { .. }
                | Error::Convergence { .. }
                | Error::ResidualTooLarge { .. }
                | Error::NonSkewHermitianInput { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
