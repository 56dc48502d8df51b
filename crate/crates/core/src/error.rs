use thiserror::Error;

/// Errors raised by geometry, sampling and estimation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {coords:?} is outside the valid region of chart {chart}")]
    InvalidChartPoint { chart: usize, coords: Vec<f64> },

    #[error("trajectory left every chart of the atlas (last chart {chart}, coords {coords:?})")]
    ChartEscape { chart: usize, coords: Vec<f64> },

    #[error("integration produced non-finite coordinates")]
    IntegrationDiverged,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("path points {index} and {next} do not share a chart overlap")]
    PathChartMismatch { index: usize, next: usize },

    #[error("frame basis is degenerate (|det| = {det:e})")]
    DegenerateFrame { det: f64 },

    #[error("tangent base point does not match the frame base point")]
    BaseMismatch,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("right action matrix is singular or not orthogonal")]
    SingularAction,

    #[error("loop is not closed (gap {gap:e})")]
    OpenLoop { gap: f64 },

    #[error("operation requires dimension {required}, manifold has dimension {actual}")]
    DimensionUnsupported { required: usize, actual: usize },

    #[error("kernel has unbounded support")]
    UnboundedKernel,

    #[error("collapsed multilayer mode requires identity nonlinearities")]
    ModeMismatch,

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("all importance weights are degenerate")]
    DegenerateWeights,

    #[error("no neighbour has kernel weight above the truncation threshold")]
    EmptyNeighborhood,

    #[error("numerical blow-up: {0}")]
    NumericalBlowup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidChartPoint { .. } => "InvalidChartPoint",
            Error::ChartEscape { .. } => "ChartEscape",
            Error::IntegrationDiverged => "IntegrationDiverged",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::PathChartMismatch { .. } => "PathChartMismatch",
            Error::DegenerateFrame { .. } => "DegenerateFrame",
            Error::BaseMismatch => "BaseMismatch",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::SingularAction => "SingularAction",
            Error::OpenLoop { .. } => "OpenLoop",
            Error::DimensionUnsupported { .. } => "DimensionUnsupported",
            Error::UnboundedKernel => "UnboundedKernel",
            Error::ModeMismatch => "ModeMismatch",
            Error::ChannelMismatch { .. } => "ChannelMismatch",
            Error::DegenerateWeights => "DegenerateWeights",
            Error::EmptyNeighborhood => "EmptyNeighborhood",
            Error::NumericalBlowup(_) => "NumericalBlowup",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::UnknownSuite(_) => "UnknownSuite",
        }
    }
}
