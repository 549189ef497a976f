//! Central finite differences: the independent gradient oracle.
//!
//! Evaluates the target function directly at perturbed points, so it never
//! touches the tape's backward rules.

use super::Tensor;
use crate::error::{Error, Result};

/// Step size giving the best accuracy/roundoff tradeoff in double precision.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Gradient of a scalar-valued function by central differences,
/// (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
pub fn finite_diff_gradient<F>(mut f: F, x: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::domain("finite_diff_gradient: step must be positive"));
    }
    let mut probe = x.clone();
    let mut grad = vec![0.0; x.numel()];
    for i in 0..x.numel() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite("finite_diff_gradient evaluation"));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    let mut out = Tensor::new(x.shape().to_vec(), grad)?;
    out.requires_grad = false;
    Ok(out)
}

/// Max relative error with denominator max(|a|, |b|, 1e-8).
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "max_rel_err length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Compare the tape gradient of `build` (a scalar function of one leaf)
/// against central finite differences. Returns the max relative error.
pub fn check_grad_vs_fd<F>(build: F, x0: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut super::Tape, super::TensorId) -> Result<super::TensorId>,
{
    let mut tape = super::Tape::new();
    let x = tape.param(x0.shape(), x0.data())?;
    let loss = build(&mut tape, x)?;
    tape.backward(loss)?;
    let analytic = tape
        .grad(x)
        .ok_or(Error::Tape("leaf did not receive a gradient"))?
        .to_vec();

    let numeric = finite_diff_gradient(
        |probe| {
            let mut t = super::Tape::new();
            let id = t.param(probe.shape(), probe.data())?;
            let l = build(&mut t, id)?;
            Ok(t.data(l)[0])
        },
        x0,
        h,
    )?;
    Ok(max_rel_err(&analytic, numeric.data()))
}
