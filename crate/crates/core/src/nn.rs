//! Shared layer plumbing: activations and seeded initialisation.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    #[default]
    Elu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Elu => tape.elu(x, 1.0),
        }
    }
}

/// Xavier/Glorot uniform draw, `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product matches")
}

/// Copies every tensor onto the tape as a trainable leaf.
pub(crate) fn bind_all(tape: &mut Tape, params: &[&Tensor]) -> Vec<Var> {
    params.iter().map(|t| tape.param((*t).clone())).collect()
}

/// Snapshot of the gradients of `vars`, in order.
pub(crate) fn collect_grads(tape: &Tape, vars: &[Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|&v| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
        })
        .collect()
}
