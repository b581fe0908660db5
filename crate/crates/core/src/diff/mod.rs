//! Reverse-mode differentiation over dense matrices of rank ≤ 2.
//!
//! A [`Tape`] records each operation eagerly; [`Tape::backward`] replays the
//! record in reverse and accumulates gradients on leaves. Parameters live in a
//! [`ParamStore`] and are bound onto a fresh tape for every forward pass.

mod adam;
mod matrix;
mod params;
mod tape;

use alloc::vec::Vec;

pub use adam::{Adam, AdamConfig};
pub use matrix::Matrix;
pub use params::{Binding, ParamId, ParamStore};
pub use tape::{OpKind, Tape, Var};

pub(crate) use tape::{softmax_rows, trace_expm_hadamard_with_grad};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("{op}: incompatible operand shapes {shapes:?}")]
    Shape { op: &'static str, shapes: Vec<(usize, usize)> },
    #[error("{op}: expected {expected} operands, got {got}")]
    Arity { op: &'static str, expected: usize, got: usize },
    #[error("log of non-positive value {value}")]
    NonPositiveLog { value: f64 },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: &'static str },
}

/// Value of `tr(exp(G ∘ G))` without recording anything.
pub fn trace_expm_hadamard(g: &Matrix) -> Result<f64, DiffError> {
    if g.rows() != g.cols() {
        return Err(DiffError::Shape { op: "trace_expm_hadamard", shapes: alloc::vec![g.shape()] });
    }
    Ok(trace_expm_hadamard_with_grad(g).0)
}
