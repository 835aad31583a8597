use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::tensor::Precision;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid shape {0:?}: dims must be positive")]
    InvalidShape(Vec<usize>),

    #[error("shape {shape:?} holds {expected} elements but {found} values were given")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("operation needs at least one element")]
    Empty,

    #[error("invalid quantization scale {0}")]
    InvalidScale(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer `{layer}`: {reason}")]
    Layer { layer: String, reason: String },

    #[error("layer `{layer}` produced a non-finite value")]
    NonFiniteActivation { layer: String },

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("layer `{0}` is not an activation layer")]
    NotAnActivation(String),

    #[error("model `{0}` has no weights (descriptor mode)")]
    MissingWeights(String),

    #[error("input shape {found:?} does not match model input {expected:?}")]
    InputShape {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("sample {index}: label {label} out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("sweep of layer `{layer}` at s={sparsity}, {precision} failed: {source}")]
    Sweep {
        layer: String,
        sparsity: f32,
        precision: Precision,
        #[source]
        source: Box<Error>,
    },

    #[error("sensitivity table does not match the model: {0}")]
    TableMismatch(String),

    #[error(
        "budget of {budget_bytes} bytes cannot be met; the lowest reachable memory is {best_memory_bytes} bytes"
    )]
    Infeasible {
        budget_bytes: u64,
        best_memory_bytes: u64,
        latency_budget: Option<f64>,
        best_latency: f64,
    },

    #[error("{0} assignments exceed the brute-force limit")]
    TooLarge(u128),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
