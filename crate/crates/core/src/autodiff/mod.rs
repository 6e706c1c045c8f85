//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive applied to [`Var`] handles. Values are
//! 2-D tensors, so one node can hold a scalar, a 1xN spectrum or a weight
//! matrix; elementwise primitives broadcast rows and columns of length one.
//! The encoder, the loss and the radiative transfer decoder are all
//! differentiated through the same tape.
//!
//! ```
//! use prosail_tvae::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.scalar(3.0);
//! let y = x * x;
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(y.item(), 9.0);
//! assert_eq!(grads.scalar(x), 6.0);
//! ```

mod check;
mod ops;
mod optim;
mod tape;

pub use check::{grad_check, relative_error, GradCheckReport, GradCheckRow};
pub use optim::{Adam, AdamConfig};
pub use tape::{Fault, Gradients, Tape, Tensor, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op} domain")]
    Domain { op: &'static str },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("output index {index} out of range ({len} outputs)")]
    OutputIndex { index: usize, len: usize },
}

/// A finished recording of a vector function of scalar inputs.
pub struct Recording {
    tape: Tape,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl Recording {
    pub fn outputs(&self) -> Vec<f64> {
        self.outputs.iter().map(|&id| Var { tape: &self.tape, id }.item()).collect()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Gradient of output `index` with respect to every input.
    pub fn gradient(&self, index: usize) -> Result<Vec<f64>, DiffError> {
        let &out = self.outputs.get(index).ok_or(DiffError::OutputIndex {
            index,
            len: self.outputs.len(),
        })?;
        let grads = self.tape.backward(Var { tape: &self.tape, id: out })?;
        Ok(self
            .inputs
            .iter()
            .map(|&id| grads.scalar(Var { tape: &self.tape, id }))
            .collect())
    }
}

/// Evaluates `f` on scalar inputs while recording it.
///
/// Outputs must be scalars. Fails with the first faulting primitive.
pub fn forward<F>(f: F, inputs: &[f64]) -> Result<Recording, DiffError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Vec<Var<'t>>,
{
    let tape = Tape::new();
    let (input_ids, output_ids) = {
        let vars: Vec<Var<'_>> = inputs.iter().map(|&x| tape.scalar(x)).collect();
        let outs = f(&tape, &vars);
        for o in &outs {
            if o.shape() != (1, 1) {
                return Err(DiffError::Shape(format!("output {:?} is not a scalar", o.shape())));
            }
        }
        (
            vars.iter().map(|v| v.id()).collect::<Vec<_>>(),
            outs.iter().map(|v| v.id()).collect::<Vec<_>>(),
        )
    };
    tape.check()?;
    Ok(Recording { tape, inputs: input_ids, outputs: output_ids })
}

#[cfg(test)]
mod tests;
