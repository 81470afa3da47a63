//! Dense `f64` tensors, a reverse-mode tape over a fixed op set, Adam, and the
//! checkpoint format.
//!
//! The tape is rebuilt for every evaluation. Parameters live outside it (in a
//! slice of [`Tensor`]s) and are referenced through [`Var::Param`], so one set
//! of weights can back many independent tapes.

mod adam;
mod checkpoint;
pub mod kernels;
mod lstm;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use lstm::{bilstm, lstm_cell, LstmWeights};
pub use tape::{ParamGrads, Tape, TapeGrads, Var};
pub use tensor::Tensor;

/// Plain cosine similarity of two equal-length slices.
///
/// Returns `0.0` when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = kernels::dot(a, a).sqrt();
    let nb = kernels::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    kernels::dot(a, b) / (na * nb)
}
