//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the tensor engine, layers, training, I/O, and protocols.
#[derive(Debug, Error)]
pub enum Error {
    /// Two shapes that must agree do not; carries both.
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A layer or generator was configured with inconsistent hyperparameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller violated an API precondition (non-scalar loss, label out of range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Operation issued in the wrong object state (consumed tape, missing weights, ...).
    #[error("invalid state: {0}")]
    State(String),

    /// Batch statistics are undefined: a single value per channel.
    #[error("degenerate batch: batch normalization requires at least 2 values per channel, got 1")]
    DegenerateBatch,

    /// A signature with zero norm cannot be compared.
    #[error("degenerate signature: zero-norm vector")]
    DegenerateSignature,

    /// Malformed file contents; `offset` is the byte position where parsing failed.
    #[error("format error at byte {offset}: {what}")]
    Format { offset: usize, what: String },

    /// Checkpoint file written by an incompatible format version.
    #[error("checkpoint version mismatch: file has {found}, expected {expected}")]
    CkptVersion { found: u32, expected: u32 },

    /// Checkpoint payload does not match its recorded checksum.
    #[error("checkpoint checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    CkptChecksum { stored: u64, computed: u64 },

    /// A checkpoint tensor does not fit the model it is being loaded into.
    #[error("checkpoint tensor {name:?} has shape {found:?}, model expects {expected:?}")]
    CkptShape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },

    /// Input data is unusable (empty dataset, empty score list, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Verification protocol violation (unenrolled claim, too few classes, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The training loop failed; names the epoch where it happened.
    #[error("training failed at epoch {epoch}: {what}")]
    Training { epoch: usize, what: String },

    /// The model cannot perform the requested operation (e.g. no signature layer).
    #[error("capability error: {0}")]
    Capability(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
