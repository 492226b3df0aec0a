use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent {agent} has no in-neighbors (zero column in the adjacency matrix)")]
    ZeroColumn { agent: usize },

    #[error("no strongly connected graph with a self-loop after {retries} draws")]
    NotStronglyConnected { retries: usize },

    #[error("degenerate block: {0}")]
    DegenerateBlock(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("support mismatch at index {index}: q is zero where p is positive")]
    SupportMismatch { index: usize },

    #[error("invalid likelihood: {0}")]
    InvalidLikelihood(String),

    #[error("step-size {0} outside the open interval (0, 1)")]
    DeltaOutOfRange(f64),

    #[error("window {window} is larger than the horizon {horizon}")]
    WindowTooLarge { window: usize, horizon: usize },

    #[error("cluster informativeness must be positive (d0 = {d0}, d1 = {d1})")]
    ZeroInformativeness { d0: f64, d1: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("insufficient steps: {0}")]
    InsufficientSteps(String),

    #[error("mismatched configuration: {0}")]
    MismatchedConfig(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable name of the variant, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroColumn { .. } => "ZeroColumn",
            Error::NotStronglyConnected { .. } => "NotStronglyConnected",
            Error::DegenerateBlock(_) => "DegenerateBlock",
            Error::InvalidRegime(_) => "InvalidRegime",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::InvalidParams(_) => "InvalidParams",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SupportMismatch { .. } => "SupportMismatch",
            Error::InvalidLikelihood(_) => "InvalidLikelihood",
            Error::DeltaOutOfRange(_) => "DeltaOutOfRange",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::ZeroInformativeness { .. } => "ZeroInformativeness",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::InsufficientSteps(_) => "InsufficientSteps",
            Error::MismatchedConfig(_) => "MismatchedConfig",
            Error::Config(_) => "Config",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
