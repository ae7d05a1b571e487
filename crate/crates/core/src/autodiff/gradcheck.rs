use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of `f` at `point` with central finite
/// differences of step `step`.
///
/// `f` receives one tape variable per entry of `point` and must return a
/// scalar. The result is `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)`
/// over all inputs jointly (zero when both gradients vanish).
pub fn grad_check<F>(f: F, point: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("grad_check: step {step} must be > 0")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = vars
        .iter()
        .flat_map(|&v| grads.get(v).data().to_vec())
        .collect();

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut numeric = Vec::with_capacity(analytic.len());
    let mut work = point.to_vec();
    for k in 0..work.len() {
        for i in 0..work[k].numel() {
            let x0 = work[k].data()[i];
            work[k].data_mut()[i] = x0 + step;
            let fp = eval(&work)?;
            work[k].data_mut()[i] = x0 - step;
            let fm = eval(&work)?;
            work[k].data_mut()[i] = x0;
            numeric.push((fp - fm) / (2.0 * step));
        }
    }

    let diff = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if scale == 0.0 { diff } else { diff / scale })
}
