use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid action set: {0}")]
    InvalidActionSet(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("illegal action {action} (available: {available})")]
    IllegalAction { action: u64, available: String },
    #[error("{what} budget exceeded (limit {limit})")]
    BudgetExceeded { what: &'static str, limit: u64 },
    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),
    #[error("stage {stage} is not representable by family {family}")]
    StageOutOfRange { family: String, stage: usize },
    #[error("degenerate mean at stage {0}")]
    DegenerateMean(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
