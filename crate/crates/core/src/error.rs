use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tower depth must be at least 1")]
    EmptyTower,
    #[error("level {level} outside tower of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("not a tower rational at this depth: {0}")]
    NotTowerRational(String),
    #[error("parameter not defined at this level: level {level} < canonical level {canonical}")]
    LevelBelowCanonical { level: usize, canonical: usize },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("family size {count} exceeds p+1 = {max}")]
    FamilyTooLarge { count: usize, max: usize },
    #[error("index out of range: {what} = {index}, bound {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("dense materialization refused at this level (dimension {dim} exceeds {budget})")]
    DenseBudget { dim: usize, budget: usize },
    #[error("label budget exceeded: {count} labels at level {level}")]
    LabelBudget { level: usize, count: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("witness indices must lie above the Γ cut (index {index} < cut {cut})")]
    BelowGammaCut { index: usize, cut: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
