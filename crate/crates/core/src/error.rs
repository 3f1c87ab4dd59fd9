//! Error type shared across the crate.
//!
//! Errors fall into two classes: data and configuration problems
//! ([`Error::exit_code`] 2), and internal invariant violations (exit code 3).
//! The CLI maps an error to its process exit code; a clean run exits 0.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown joint `{0}`")]
    UnknownJoint(String),

    #[error("unknown exercise `{0}`")]
    UnknownExercise(String),

    #[error("inverted bound for {joint}: lo {lo} > hi {hi}")]
    InvertedBound { joint: String, lo: f64, hi: f64 },

    #[error("empty series")]
    EmptySeries,

    #[error("series too short: {len} frames, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("joint count out of range: {0}")]
    BadJointCount(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("reference too short: {0} samples, need at least 2")]
    BadReference(usize),

    #[error("degenerate cycle: {0}")]
    DegenerateCycle(String),

    #[error("empty cycle")]
    EmptyCycle,

    #[error("no key frame: cycle spans no frames")]
    NoKeyFrame,

    #[error("morphometric value out of range: {0}")]
    MorphOutOfRange(String),

    #[error("bad token id {id}, vocabulary size {vocab}")]
    BadToken { id: usize, vocab: usize },

    #[error("top-K count {k} outside 1..={max}")]
    BadK { k: usize, max: usize },

    #[error("bad session spec: {0}")]
    BadSessionSpec(String),

    #[error("malformed stream at line {line}: {msg}")]
    StreamFormat { line: usize, msg: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 3 for internal invariant violations,
    /// 2 for every other (data or configuration) error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 3,
            _ => 2,
        }
    }
}
