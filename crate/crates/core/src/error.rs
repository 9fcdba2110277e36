// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}:{line}: non-numeric sample `{text}`")]
    NonNumericSample {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("{0}: trace has no samples")]
    EmptyTrace(PathBuf),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("unknown subject `{0}`")]
    UnknownSubject(String),

    #[error("dataset needs at least {needed} subjects, found {found}")]
    TooFewSubjects { needed: usize, found: usize },

    #[error("training windows contain no {0} examples")]
    MissingClass(&'static str),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid tier spec: {0}")]
    InvalidTier(String),

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("training data is empty")]
    EmptyData,

    #[error("invalid judgment thresholds: tq_min={tq_min}, tq_max={tq_max}")]
    InvalidThresholds { tq_min: f64, tq_max: f64 },

    #[error("invalid cascade: {0}")]
    InvalidCascade(String),

    #[error("layer {layer} out of range (topology has {count} layers)")]
    InvalidLayer { layer: usize, count: usize },

    #[error("topology does not match cascade: {0}")]
    TopologyMismatch(String),

    #[error("{0} is undefined (zero denominator)")]
    UndefinedMetric(&'static str),

    #[error("baseline {0} is zero or undefined")]
    ZeroBaseline(&'static str),

    #[error("report schema mismatch: `{a}` vs `{b}`")]
    SchemaMismatch { a: String, b: String },

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint parse error at line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
