use thiserror::Error;

use crate::geometry::Point;
use crate::partition::{StuckCell, TaggedFamily};
use crate::riemann::ApproximationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed shape: {0}")]
    MalformedShape(String),

    #[error("scale factor {0} outside (0, 1]")]
    BadScale(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("region lies outside the measure's universe")]
    OutOfUniverse,

    #[error("tolerance {tol:e} unreachable within the cell budget (reached {reached:e})")]
    ToleranceUnreachable { tol: f64, reached: f64 },

    #[error("function `{0}` declares no piece structure")]
    NotPiecewise(String),

    #[error("no approximate-continuity radius certifiable at {at:?}")]
    NotApproxContinuous { at: Point },

    #[error("{at:?} is not a Lebesgue point")]
    NotLebesgue { at: Point },

    #[error("precondition not certified: {0}")]
    PreconditionUncertified(String),

    #[error("null tube infeasible: {0}")]
    TubeInfeasible(String),

    #[error("gauge value {value} at {at:?} outside (0, 1]")]
    GaugeOutOfRange { at: Point, value: f64 },

    #[error("sieve residual {residual:e} > eta {eta:e} at max depth ({} stuck cells)", stuck.len())]
    DepthExceeded {
        residual: f64,
        eta: f64,
        stuck: Vec<StuckCell>,
    },

    #[error("ball packing stalled at residual {residual:e} > eta {eta:e}")]
    ResidualStuck {
        residual: f64,
        eta: f64,
        family: Box<TaggedFamily>,
    },

    #[error("bound violated: {reason}")]
    BoundViolated {
        reason: String,
        reports: Vec<ApproximationReport>,
    },

    #[error("unknown corpus function `{0}`")]
    UnknownFunction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
