use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("{op}: dimension mismatch, left shape {left:?} vs right shape {right:?}")]
    DimMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("masked softmax over empty support: every mask entry is zero")]
    EmptySupport,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("embedding id {id} out of range for table with {rows} rows")]
    EmbeddingIdOutOfRange { id: usize, rows: usize },
    #[error("backward requires a single-element loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },
    #[error("non-finite gradient for parameter `{name}`")]
    NonFiniteGrad { name: String },
    #[error("forward pass is not deterministic: two identical evaluations disagree")]
    NonDeterministicForward,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}
