use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found} (at point {index})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("complex would contain {count} simplices, exceeding the budget of {budget}")]
    BudgetExceeded { count: u64, budget: u64 },

    #[error("malformed complex: {0}")]
    MalformedComplex(String),

    #[error("no persistence pairs in dimension {0}")]
    EmptyDimension(usize),

    #[error("invalid threshold policy parameter: {0}")]
    InvalidPolicy(String),

    #[error("infeasible dataset spec: {0}")]
    InfeasibleSpec(String),

    #[error("rejection sampling stalled after {attempts} attempts ({accepted} of {wanted} accepted)")]
    RejectionStall {
        attempts: u64,
        accepted: usize,
        wanted: usize,
    },

    #[error("layout overflow: {0}")]
    LayoutOverflow(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("unsupported input dimension {0}; decision regions are rasterized in 2-D only")]
    UnsupportedDimension(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular neighborhood at point {index} even after regularization")]
    SingularNeighborhood { index: usize },

    #[error("input of {n} points exceeds the limit of {max}")]
    SizeLimit { n: usize, max: usize },

    #[error("network error: {0}")]
    Network(String),

    #[error("dataset not found: {0}")]
    NotFound(String),

    #[error("dataset has {0} distinct labels; a binary problem is required")]
    NonBinaryLabels(usize),

    #[error("cache integrity check failed for {path}: expected {expected}, found {found}")]
    CacheIntegrity {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::MalformedComplex(_) => "malformed_complex",
            Error::EmptyDimension(_) => "empty_dimension",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InfeasibleSpec(_) => "infeasible_spec",
            Error::RejectionStall { .. } => "rejection_stall",
            Error::LayoutOverflow(_) => "layout_overflow",
            Error::InvalidArchitecture(_) => "invalid_architecture",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Divergence { .. } => "divergence",
            Error::UnsupportedDimension(_) => "unsupported_dimension",
            Error::InsufficientData(_) => "insufficient_data",
            Error::SingularNeighborhood { .. } => "singular_neighborhood",
            Error::SizeLimit { .. } => "size_limit",
            Error::Network(_) => "network",
            Error::NotFound(_) => "not_found",
            Error::NonBinaryLabels(_) => "non_binary_labels",
            Error::CacheIntegrity { .. } => "cache_integrity",
            Error::MissingArtifacts(_) => "missing_artifacts",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
