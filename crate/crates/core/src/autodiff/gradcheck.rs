//! Central finite-difference gradient checking.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest disagreement found by [`gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `|analytic − numeric| / max(|analytic|, |numeric|, 1)`.
    pub max_rel_err: f64,
    pub input: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares reverse-mode gradients of `f` with central differences of step
/// `step`. Non-scalar outputs are reduced by a weighted sum with fixed
/// weights drawn from `seed`.
pub fn gradcheck<F>(inputs: &[Tensor], step: f64, seed: u64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let weights = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let shape = tape.value(out).shape().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?
    };
    let eval = |xs: &[Tensor], grads: bool| -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        tape.set_finite_checks(false);
        let vars: Vec<Var> = xs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let w = tape.constant(weights.clone());
        let prod = tape.mul(out, w)?;
        let loss = tape.sum(prod)?;
        let value = tape.value(loss).data()[0];
        if !grads {
            return Ok((value, Vec::new()));
        }
        tape.backward(loss)?;
        let g = vars
            .iter()
            .map(|&v| {
                tape.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
            })
            .collect();
        Ok((value, g))
    };
    let (_, analytic) = eval(inputs, true)?;
    let mut worst = GradCheck {
        max_rel_err: 0.0,
        input: 0,
        element: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut xs = inputs.to_vec();
    for k in 0..inputs.len() {
        for e in 0..inputs[k].len() {
            let orig = inputs[k].data()[e];
            xs[k].data_mut()[e] = orig + step;
            let up = eval(&xs, false)?.0;
            xs[k].data_mut()[e] = orig - step;
            let down = eval(&xs, false)?.0;
            xs[k].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[k].data()[e];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite { op: "gradcheck" });
            }
            let err = libm::fabs(a - numeric) / libm::fabs(a).max(libm::fabs(numeric)).max(1.0);
            if err > worst.max_rel_err {
                worst = GradCheck {
                    max_rel_err: err,
                    input: k,
                    element: e,
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(worst)
}
