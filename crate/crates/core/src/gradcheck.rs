//! Central finite-difference checks of tape gradients.
//!
//! The relative error of one entry is `|a − n| / max(|a|, |n|, floor)` where
//! `a` is the tape gradient and `n` the numeric one. The floor keeps entries
//! whose true gradient is near zero from turning the ~1e-10 rounding noise
//! of a central difference into a large ratio.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::{Tape, Tensor, Var};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor index, flat element index)` of the worst relative error.
    pub worst: (usize, usize),
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            checked: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst: (0, 0),
        }
    }

    fn record(&mut self, tensor: usize, index: usize, analytic: f64, numeric: f64) {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(DEFAULT_FLOOR);
        self.checked += 1;
        self.max_abs_error = self.max_abs_error.max(abs);
        if rel > self.max_rel_error || self.checked == 1 {
            self.max_rel_error = self.max_rel_error.max(rel);
            self.worst = (tensor, index);
        }
    }

    pub fn merge(&mut self, other: &GradCheck) {
        self.checked += other.checked;
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

/// Checks the gradient of a scalar function recorded on a tape. `build`
/// receives the tape with `params` registered as leaves and returns the
/// `1×1` output.
pub fn check_tape_function<F>(params: &[Tensor], step: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        scalar(&tape, out)
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    scalar(&tape, out)?;
    let mut grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.take_or_zeros(v, p.shape()))
        .collect();

    let mut report = GradCheck::new();
    let mut work = params.to_vec();
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..work[t].len() {
            let original = work[t].data()[i];
            work[t].data_mut()[i] = original + step;
            let plus = eval(&work)?;
            work[t].data_mut()[i] = original - step;
            let minus = eval(&work)?;
            work[t].data_mut()[i] = original;
            report.record(t, i, grad.data()[i], (plus - minus) / (2.0 * step));
        }
    }
    Ok(report)
}

fn scalar(tape: &Tape, out: Var) -> Result<f64> {
    let v = tape.value(out);
    if v.shape() != (1, 1) {
        return Err(Error::Domain(format!("gradient check needs a 1x1 output, got {:?}", v.shape())));
    }
    Ok(v.get(0, 0))
}

/// Checks every parameter of `model` against the mean cross-entropy of the
/// batch. Tensor indices follow [`ModelParams::tensors`].
pub fn check_model(model: &ModelParams, xs: &[&Tensor], labels: &[usize], step: f64) -> Result<GradCheck> {
    let analytic = model.loss_and_gradients(xs, labels)?.grads;
    let mut work = model.clone();
    let mut report = GradCheck::new();
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let original = work.tensors()[t].data()[i];
            work.tensors_mut()[t].data_mut()[i] = original + step;
            let plus = work.loss_and_gradients(xs, labels)?.loss;
            work.tensors_mut()[t].data_mut()[i] = original - step;
            let minus = work.loss_and_gradients(xs, labels)?.loss;
            work.tensors_mut()[t].data_mut()[i] = original;
            report.record(t, i, grad.data()[i], (plus - minus) / (2.0 * step));
        }
    }
    Ok(report)
}
