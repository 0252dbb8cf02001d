use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine.
///
/// Every variant carries enough context for a caller to point at the
/// offending input; [`Error::code`] gives a stable machine-readable tag.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` declared in the schema is missing from the header")]
    MissingColumn(String),
    #[error("row {row}: value `{value}` of `{attr}` is outside the declared domain")]
    DomainViolation {
        row: usize,
        attr: String,
        value: String,
    },
    #[error("row {row}: missing value for `{attr}`")]
    MissingValue { row: usize, attr: String },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("group {0} is empty")]
    EmptyGroup(String),
    #[error("label `{0}` has no tuples")]
    EmptyLabel(String),
    #[error("measure {0} is undefined (division by zero)")]
    DivisionByZeroMeasure(&'static str),
    #[error("tolerance must be a finite non-negative number, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid partition: P + U must equal 1 with P in (0, 1), got P={p}, U={u}")]
    InvalidPartition { p: f64, u: f64 },
    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),
    #[error("plan digest {plan} does not match summary digest {summary}")]
    DigestMismatch { plan: String, summary: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("cannot delete {requested} tuples from cell {group}/{label} holding {available}")]
    Overdelete {
        group: String,
        label: String,
        requested: u64,
        available: u64,
    },
    #[error("lattice deletes more tuples than cell {group}/{label} holds")]
    LatticeOverdelete { group: String, label: String },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid size {requested} for a dataset of {available} rows")]
    InvalidSize { requested: usize, available: usize },
    #[error("invalid cost model: {0}")]
    InvalidCosts(String),
    #[error("count overflow")]
    Overflow,
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case identifier used in JSON error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSchema(_) => "invalid_schema",
            Error::MissingColumn(_) => "missing_column",
            Error::DomainViolation { .. } => "domain_violation",
            Error::MissingValue { .. } => "missing_value",
            Error::Malformed(_) => "malformed",
            Error::UnknownLabel(_) => "unknown_label",
            Error::InvalidGroup(_) => "invalid_group",
            Error::EmptyGroup(_) => "empty_group",
            Error::EmptyLabel(_) => "empty_label",
            Error::DivisionByZeroMeasure(_) => "division_by_zero_measure",
            Error::InvalidTolerance(_) => "invalid_tolerance",
            Error::InvalidPartition { .. } => "invalid_partition",
            Error::InvalidTargets(_) => "invalid_targets",
            Error::InfeasibleTargets(_) => "infeasible_targets",
            Error::DigestMismatch { .. } => "digest_mismatch",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::Overdelete { .. } => "overdelete",
            Error::LatticeOverdelete { .. } => "lattice_overdelete",
            Error::InvalidLattice(_) => "invalid_lattice",
            Error::InvalidSize { .. } => "invalid_size",
            Error::InvalidCosts(_) => "invalid_costs",
            Error::Overflow => "overflow",
            Error::Io(_) => "io_failure",
        }
    }

    /// True for failures caused by the environment rather than by the input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
