//! Error type shared across the engine.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("label column '{col}' is not binary after mapping: saw {values:?}")]
    NonBinaryLabel { col: String, values: Vec<String> },
    #[error("unparseable numeric cell at data row {row}, column '{col}': '{value}'")]
    BadNumericCell {
        row: usize,
        col: String,
        value: String,
    },
    #[error("sensitive column '{col}' has fewer than 2 groups")]
    TooFewGroups { col: String },
    #[error("val_fraction must be in (0,1), got {0}")]
    BadValFraction(f64),
    #[error("dataset too small to give every group to both splits")]
    SplitTooSmall,
    #[error("synthetic dataset needs n >= 100, got {0}")]
    SyntheticTooSmall(usize),
    #[error("bias must be in [0,1], got {0}")]
    BadBias(f64),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lengths differ: {0}")]
    LengthMismatch(String),
    #[error("empty group {group}")]
    EmptyGroup { group: usize },
    #[error("empty cell (group {group}, label {label})")]
    EmptyCell { group: usize, label: u8 },
    #[error("delta must be in (0,1), got {0}")]
    BadDelta(f64),
    #[error("grid mitigation requires a binary sensitive attribute, got {0} groups")]
    NonBinaryAttribute(usize),
    #[error("invalid mitigator parameter: {0}")]
    BadMitigatorParam(String),
    #[error("weights must contain at least one positive entry")]
    AllZeroWeights,
    #[error("ECI undefined: no trials recorded")]
    EciUndefined,
    #[error("config '{0}' has no unmitigated trial record")]
    NoBaseRecord(String),
    #[error("model requires group metadata for prediction")]
    NeedsGroups,
    #[error("sim table: {0}")]
    SimTable(String),
    #[error("unknown model format version {0}")]
    ModelVersion(u32),
    #[error("invalid run parameter: {0}")]
    BadRunParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
