//! Dense and LSTM networks with exact gradients, and the Adam optimizer.
//!
//! All arithmetic is `f64`.

mod adam;
mod dense;
mod lstm;

use rand::Rng;

use crate::error::NnError;

pub use adam::Adam;
pub use dense::DenseNet;
pub use lstm::{LstmNet, LstmState};

/// Teacher-forced training sequence: row-major inputs and targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequence {
    pub input_dim: usize,
    pub output_dim: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Sequence {
            input_dim,
            output_dim,
            ..Default::default()
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) {
        debug_assert_eq!(input.len(), self.input_dim);
        debug_assert_eq!(target.len(), self.output_dim);
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn len(&self) -> usize {
        if self.input_dim == 0 {
            0
        } else {
            self.inputs.len() / self.input_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, step: usize) -> &[f64] {
        &self.inputs[step * self.input_dim..(step + 1) * self.input_dim]
    }

    pub fn target(&self, step: usize) -> &[f64] {
        &self.targets[step * self.output_dim..(step + 1) * self.output_dim]
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::Shape { expected, got })
    }
}

fn uniform_init<R: Rng>(params: &mut [f64], fan_in: usize, rng: &mut R) {
    let s = 1.0 / (fan_in as f64).sqrt();
    for p in params {
        *p = rng.random_range(-s..s);
    }
}
