use thiserror::Error;

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or configuration.
    Usage,
    /// Input data problems (missing columns, unparsable cells, degenerate covariates).
    Data,
    /// Factorization failures, degenerate fits, exhausted search.
    Numerical,
}

#[derive(Debug, Error)]
pub enum SnvcError {
    #[error("at least {needed} sites are required, got {found}")]
    TooFewSites { found: usize, needed: usize },

    #[error("non-finite coordinate at site {0}")]
    NonFiniteCoordinate(usize),

    #[error("all sites are coincident")]
    AllSitesCoincident,

    #[error("range must be positive, got {0}")]
    NonPositiveRange(f64),

    #[error("{n} sites exceed the dense eigen-decomposition limit of {limit}")]
    TooManySites { n: usize, limit: usize },

    #[error("spatial basis has no eigenvectors")]
    EmptyBasis,

    #[error(
        "covariate {0} requests a spatially varying coefficient but the spatial basis is empty"
    )]
    EmptySpatialBasis(usize),

    #[error("vector is constant")]
    ConstantVector,

    #[error("covariate is constant; disable its non-spatial term")]
    ConstantCovariate,

    #[error("covariate has {found} distinct values, need at least {needed}")]
    TooFewDistinctValues { found: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-effect crossproduct X'X is rank-deficient")]
    SingularFixedBlock,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("weighted moment matrix is singular at site {site}")]
    SingularLocalFit { site: usize },

    #[error("effective degrees of freedom exhausted (tr(S) = {trace:.3}, N = {n})")]
    DegreesExhausted { trace: f64, n: usize },

    #[error("no bandwidth candidate produced a valid fit")]
    NoFeasibleBandwidth,

    #[error("invalid configuration for `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("no rows left after dropping missing values")]
    EmptyAfterFiltering,

    #[error("cannot parse `{value}` at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SnvcError {
    pub fn class(&self) -> ErrorClass {
        use SnvcError::*;
        match self {
            NonPositiveRange(_)
            | InvalidArgument(_)
            | ConfigInvalid { .. }
            | TooManySites { .. } => ErrorClass::Usage,
            TooFewSites { .. }
            | NonFiniteCoordinate(_)
            | AllSitesCoincident
            | ConstantVector
            | ConstantCovariate
            | TooFewDistinctValues { .. }
            | DimensionMismatch(_)
            | InvalidData(_)
            | MissingColumn(_)
            | EmptyAfterFiltering
            | Parse { .. }
            | Io(_)
            | Csv(_)
            | Json(_) => ErrorClass::Data,
            EmptyBasis
            | EmptySpatialBasis(_)
            | SingularFixedBlock
            | NumericalBreakdown(_)
            | SingularLocalFit { .. }
            | DegreesExhausted { .. }
            | NoFeasibleBandwidth => ErrorClass::Numerical,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        use SnvcError::*;
        match self {
            TooFewSites { .. } => "TooFewSites",
            NonFiniteCoordinate(_) => "NonFiniteCoordinate",
            AllSitesCoincident => "AllSitesCoincident",
            NonPositiveRange(_) => "NonPositiveRange",
            TooManySites { .. } => "TooManySites",
            EmptyBasis => "EmptyBasis",
            EmptySpatialBasis(_) => "EmptySpatialBasis",
            ConstantVector => "ConstantVector",
            ConstantCovariate => "ConstantCovariate",
            TooFewDistinctValues { .. } => "TooFewDistinctValues",
            DimensionMismatch(_) => "DimensionMismatch",
            InvalidArgument(_) => "InvalidArgument",
            SingularFixedBlock => "SingularFixedBlock",
            NumericalBreakdown(_) => "NumericalBreakdown",
            SingularLocalFit { .. } => "SingularLocalFit",
            DegreesExhausted { .. } => "DegreesExhausted",
            NoFeasibleBandwidth => "NoFeasibleBandwidth",
            ConfigInvalid { .. } => "ConfigInvalid",
            InvalidData(_) => "InvalidData",
            MissingColumn(_) => "MissingColumn",
            EmptyAfterFiltering => "EmptyAfterFiltering",
            Parse { .. } => "ParseError",
            Io(_) => "Io",
            Csv(_) => "Csv",
            Json(_) => "Json",
        }
    }

    pub fn config(field: &str, message: impl Into<String>) -> Self {
        SnvcError::ConfigInvalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SnvcError>;
