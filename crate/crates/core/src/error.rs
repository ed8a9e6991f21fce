//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KlinError {
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("verification mismatch: {0}")]
    VerifyMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KlinError>;
