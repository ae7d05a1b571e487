//! Sum spectral efficiency, its gradient and the power constraint.

use lnn_core::{Tape, Tensor, Var};
use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::channel::{CMatrix, ChannelSet};
use crate::error::{Error, Result};

/// Per-user precoders `V_k` (`M × d`) with the budget and receiver noise they
/// are evaluated against.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub v: Vec<CMatrix>,
    pub power_budget: f64,
    pub noise_power: f64,
}

impl PrecoderSet {
    pub fn zeros(n_users: usize, m: usize, d: usize, power_budget: f64, noise_power: f64) -> Self {
        Self {
            v: vec![CMatrix::zeros(m, d); n_users],
            power_budget,
            noise_power,
        }
    }

    /// `Σ_k ‖V_k‖²_F`
    pub fn total_power(&self) -> f64 {
        self.v.iter().map(|v| v.norm_squared()).sum()
    }

    pub fn is_feasible(&self) -> bool {
        self.total_power() <= self.power_budget + 1e-9
    }

    fn check(&self, h: &ChannelSet) -> Result<()> {
        if self.v.len() != h.n_users() {
            return Err(Error::Invalid(format!(
                "{} precoders for {} users",
                self.v.len(),
                h.n_users()
            )));
        }
        let m = h.n_tx();
        if let Some(v) = self.v.iter().find(|v| v.nrows() != m) {
            return Err(Error::Invalid(format!("precoder has {} rows, array has {m}", v.nrows())));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::Invalid(format!("noise power {} must be > 0", self.noise_power)));
        }
        Ok(())
    }
}

/// Log-determinant (natural) of a Hermitian positive definite matrix.
pub(crate) fn hermitian_logdet(a: CMatrix) -> Result<f64> {
    let n = a.nrows();
    let chol = Cholesky::new(a).ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    Ok((0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Received covariance at user `k`: `Σ_j H_k V_j V_jᴴ H_kᴴ + σ² I`, and the
/// same with user `k`'s own term removed.
pub(crate) fn covariances(h: &CMatrix, v: &[CMatrix], k: usize, noise: f64) -> (CMatrix, CMatrix) {
    let nr = h.nrows();
    let mut interference = CMatrix::identity(nr, nr) * Complex64::new(noise, 0.0);
    let mut own = CMatrix::zeros(nr, nr);
    for (j, vj) in v.iter().enumerate() {
        let a = h * vj;
        let s = &a * a.adjoint();
        if j == k {
            own = s;
        } else {
            interference += s;
        }
    }
    (&interference + own, interference)
}

/// Per-user rates in bits/s/Hz:
/// `log₂ det(I + H_k V_k V_kᴴ H_kᴴ (Σ_{j≠k} H_k V_j V_jᴴ H_kᴴ + σ² I)⁻¹)`,
/// evaluated as `log₂ det(total) − log₂ det(interference + noise)`.
pub fn user_rates(h: &ChannelSet, v: &PrecoderSet) -> Result<Vec<f64>> {
    v.check(h)?;
    let mut out = Vec::with_capacity(h.n_users());
    for (k, hk) in h.h.iter().enumerate() {
        let (total, inr) = covariances(hk, &v.v, k, v.noise_power);
        let r = (hermitian_logdet(total)? - hermitian_logdet(inr)?) / std::f64::consts::LN_2;
        out.push(r.max(0.0));
    }
    Ok(out)
}

pub fn sum_se(h: &ChannelSet, v: &PrecoderSet) -> Result<f64> {
    Ok(user_rates(h, v)?.iter().sum())
}

/// Real form `[[X, −Y], [Y, X]]` of `X + jY`.
pub fn lower(a: &CMatrix) -> Tensor {
    let (r, c) = a.shape();
    let mut data = vec![0.0; 4 * r * c];
    let w = 2 * c;
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            data[i * w + j] = z.re;
            data[i * w + c + j] = -z.im;
            data[(r + i) * w + j] = z.im;
            data[(r + i) * w + c + j] = z.re;
        }
    }
    Tensor::from_rows(&data.chunks(w).map(<[f64]>::to_vec).collect::<Vec<_>>()).expect("rectangular")
}

/// Real and imaginary parts of `a` as two `rows × cols` tensors.
pub fn split_parts(a: &CMatrix) -> (Tensor, Tensor) {
    let (r, c) = a.shape();
    let re = (0..r * c).map(|k| a[(k / c, k % c)].re).collect();
    let im = (0..r * c).map(|k| a[(k / c, k % c)].im).collect();
    (
        Tensor::matrix(r, c, re).expect("sized"),
        Tensor::matrix(r, c, im).expect("sized"),
    )
}

/// Records the lowered form of `re + j·im` on the tape.
pub fn lower_on_tape(tape: &mut Tape, re: Var, im: Var) -> lnn_core::Result<Var> {
    let neg = tape.neg(im)?;
    let top = tape.concat_cols(&[re, neg])?;
    let bottom = tape.concat_cols(&[im, re])?;
    tape.concat_rows(&[top, bottom])
}

/// Sum SE recorded on a tape from lowered channels (`2N_r × 2M` constants)
/// and lowered precoders (`2M × 2d`). The lowering maps products to products
/// and Hermitian transposes to transposes, and the lowered determinant is the
/// squared modulus of the complex one, hence the factor 1/2.
pub fn sum_se_on_tape(tape: &mut Tape, h_low: &[Var], v_low: &[Var], noise: f64) -> lnn_core::Result<Var> {
    let mut total: Option<Var> = None;
    for (k, &hk) in h_low.iter().enumerate() {
        let n2 = tape.value(hk).shape()[0];
        let eye = tape.constant(Tensor::identity(n2).map(|x| x * noise));
        let mut inr = eye;
        let mut own = None;
        for (j, &vj) in v_low.iter().enumerate() {
            let a = tape.matmul(hk, vj)?;
            let at = tape.transpose(a)?;
            let s = tape.matmul(a, at)?;
            if j == k {
                own = Some(s);
            } else {
                inr = tape.add(inr, s)?;
            }
        }
        let cov = match own {
            Some(s) => tape.add(inr, s)?,
            None => inr,
        };
        let ld_total = tape.logdet(cov)?;
        let ld_inr = tape.logdet(inr)?;
        let r = tape.sub(ld_total, ld_inr)?;
        total = Some(match total {
            Some(t) => tape.add(t, r)?,
            None => r,
        });
    }
    let total = total.ok_or_else(|| lnn_core::Error::InvalidArgument("no users".into()))?;
    tape.scale(total, 0.5 / std::f64::consts::LN_2)
}

/// Sum SE and its gradient with respect to every precoder entry, returned as
/// `∂R/∂Re + j·∂R/∂Im` per user (the steepest-ascent direction).
pub fn se_gradient(h: &ChannelSet, v: &PrecoderSet) -> Result<(f64, Vec<CMatrix>)> {
    v.check(h)?;
    let mut tape = Tape::new();
    let h_low: Vec<Var> = h.h.iter().map(|hk| tape.constant(lower(hk))).collect();
    let mut leaves = Vec::with_capacity(v.v.len());
    let mut v_low = Vec::with_capacity(v.v.len());
    for vk in &v.v {
        let (re, im) = split_parts(vk);
        let (re, im) = (tape.leaf(re), tape.leaf(im));
        leaves.push((re, im));
        v_low.push(lower_on_tape(&mut tape, re, im)?);
    }
    let r = sum_se_on_tape(&mut tape, &h_low, &v_low, v.noise_power)?;
    let value = tape.value(r).item();
    let grads = tape.backward(r)?;
    let out = leaves
        .iter()
        .zip(&v.v)
        .map(|(&(re, im), vk)| {
            let (gr, gi) = (grads.get(re), grads.get(im));
            let c = vk.ncols();
            CMatrix::from_fn(vk.nrows(), c, |i, j| Complex64::new(gr.at(i, j), gi.at(i, j)))
        })
        .collect();
    Ok((value, out))
}

/// Scales every precoder by `sqrt(P/Σ‖V_k‖²)` when the budget is exceeded.
pub fn power_project(v: &PrecoderSet, power_budget: f64) -> Result<PrecoderSet> {
    if !(power_budget > 0.0) {
        return Err(Error::Invalid(format!("power budget {power_budget} must be > 0")));
    }
    let p = v.total_power();
    let mut out = v.clone();
    out.power_budget = power_budget;
    if p > power_budget {
        let s = Complex64::new((power_budget / p).sqrt(), 0.0);
        for vk in &mut out.v {
            *vk *= s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmatrix(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_instance(rng: &mut impl Rng, k: usize, nr: usize, m: usize, d: usize) -> (ChannelSet, PrecoderSet) {
        let h = ChannelSet::new((0..k).map(|_| random_cmatrix(rng, nr, m)).collect()).unwrap();
        let v = PrecoderSet {
            v: (0..k).map(|_| random_cmatrix(rng, m, d)).collect(),
            power_budget: 1.0,
            noise_power: rng.random_range(0.1..1.0),
        };
        (h, v)
    }

    #[test]
    fn zero_precoder_gives_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (h, _) = random_instance(&mut rng, 3, 2, 6, 2);
        let v = PrecoderSet::zeros(3, 6, 2, 1.0, 0.1);
        assert_eq!(sum_se(&h, &v).unwrap(), 0.0);
    }

    #[test]
    fn scalar_channel_gives_one_bit() {
        let h = ChannelSet::new(vec![CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))]).unwrap();
        let v = PrecoderSet {
            v: vec![CMatrix::from_element(1, 1, Complex64::new(0.0, 1.0))],
            power_budget: 1.0,
            noise_power: 1.0,
        };
        assert!((sum_se(&h, &v).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_users_add_up() {
        // User 0 sees antennas 0..2, user 1 sees antennas 2..4; precoders are
        // supported on their own user's antennas.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut h0 = random_cmatrix(&mut rng, 2, 4);
        let mut h1 = random_cmatrix(&mut rng, 2, 4);
        let mut v0 = random_cmatrix(&mut rng, 4, 2);
        let mut v1 = random_cmatrix(&mut rng, 4, 2);
        for i in 0..2 {
            for j in 2..4 {
                h0[(i, j)] = Complex64::new(0.0, 0.0);
                v0[(j, i)] = Complex64::new(0.0, 0.0);
            }
            for j in 0..2 {
                h1[(i, j)] = Complex64::new(0.0, 0.0);
                v1[(j, i)] = Complex64::new(0.0, 0.0);
            }
        }
        let noise = 0.3;
        let both = sum_se(
            &ChannelSet::new(vec![h0.clone(), h1.clone()]).unwrap(),
            &PrecoderSet {
                v: vec![v0.clone(), v1.clone()],
                power_budget: 1.0,
                noise_power: noise,
            },
        )
        .unwrap();
        // Single-user rate log₂ det(I + H V Vᴴ Hᴴ / σ²) computed directly.
        let single = |h: &CMatrix, v: &CMatrix| {
            let a = h * v;
            let m = CMatrix::identity(2, 2) + &a * a.adjoint() / Complex64::new(noise, 0.0);
            m.determinant().re.log2()
        };
        let want = single(&h0, &v0) + single(&h1, &v1);
        assert!((both - want).abs() < 1e-9, "{both} vs {want}");
    }

    #[test]
    fn rate_is_nonnegative_and_nonincreasing_in_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (h, mut v) = random_instance(&mut rng, 3, 2, 5, 2);
            let mut last = f64::INFINITY;
            for noise in [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 50.0] {
                v.noise_power = noise;
                let r = sum_se(&h, &v).unwrap();
                assert!(r >= 0.0);
                assert!(r <= last + 1e-12);
                last = r;
            }
        }
    }

    #[test]
    fn lowering_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cmatrix(&mut rng, 2, 3);
        let b = random_cmatrix(&mut rng, 3, 4);
        let ab = lower(&(&a * &b));
        let mut tape = Tape::new();
        let (la, lb) = (tape.constant(lower(&a)), tape.constant(lower(&b)));
        let p = tape.matmul(la, lb).unwrap();
        let diff = tape
            .value(p)
            .data()
            .iter()
            .zip(ab.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn tape_rate_matches_direct_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (h, v) = random_instance(&mut rng, 3, 2, 6, 2);
            let (r, _) = se_gradient(&h, &v).unwrap();
            assert!((r - sum_se(&h, &v).unwrap()).abs() < 1e-10);
        }
    }

    /// Central differences over every real and imaginary entry.
    fn fd_gradient(h: &ChannelSet, v: &PrecoderSet, step: f64) -> Vec<CMatrix> {
        let mut out = Vec::new();
        for k in 0..v.v.len() {
            let (r, c) = v.v[k].shape();
            let mut g = CMatrix::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    for (unit, is_re) in [(Complex64::new(step, 0.0), true), (Complex64::new(0.0, step), false)] {
                        let mut p = v.clone();
                        p.v[k][(i, j)] += unit;
                        let mut m = v.clone();
                        m.v[k][(i, j)] -= unit;
                        let d = (sum_se(h, &p).unwrap() - sum_se(h, &m).unwrap()) / (2.0 * step);
                        if is_re {
                            g[(i, j)].re = d;
                        } else {
                            g[(i, j)].im = d;
                        }
                    }
                }
            }
            out.push(g);
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..25 {
            let (h, v) = random_instance(&mut rng, 2, 2, 4, 2);
            let (_, g) = se_gradient(&h, &v).unwrap();
            let fd = fd_gradient(&h, &v, 1e-5);
            let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt().max(1e-12);
            assert!(num / den < 1e-5, "relative error {}", num / den);
        }
    }

    #[test]
    fn zero_precoder_is_stationary_but_not_a_maximum() {
        // R depends on V only through V·Vᴴ, so the gradient vanishes at 0;
        // any small nonzero precoder already has positive rate.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (h, v) = random_instance(&mut rng, 1, 2, 4, 2);
        let zero = PrecoderSet::zeros(1, 4, 2, 1.0, v.noise_power);
        let (_, g) = se_gradient(&h, &zero).unwrap();
        assert!(g.iter().all(|gk| gk.iter().all(|z| z.norm() == 0.0)));
        let mut small = v.clone();
        small.v[0] *= Complex64::new(1e-3, 0.0);
        assert!(sum_se(&h, &small).unwrap() > 0.0);
    }

    #[test]
    fn no_coupling_without_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (_, v) = random_instance(&mut rng, 3, 2, 4, 2);
        let h = ChannelSet::new(vec![CMatrix::zeros(2, 4); 3]).unwrap();
        let (r, g) = se_gradient(&h, &v).unwrap();
        assert_eq!(r, 0.0);
        assert!(g.iter().all(|gk| gk.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, mut v) = random_instance(&mut rng, 2, 2, 4, 2);
        let p = v.total_power();
        assert!(p > 1.0);
        let proj = power_project(&v, 1.0).unwrap();
        assert!((proj.total_power() - 1.0).abs() < 1e-12);
        v.v.iter_mut().for_each(|x| *x *= Complex64::new(0.1, 0.0));
        assert_eq!(power_project(&v, 1.0).unwrap().v, v.v);
        let z = PrecoderSet::zeros(2, 4, 2, 1.0, 0.1);
        assert_eq!(power_project(&z, 1.0).unwrap().v, z.v);
        assert!(power_project(&z, 0.0).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (h, mut v) = random_instance(&mut rng, 2, 2, 4, 2);
        v.v.pop();
        assert!(sum_se(&h, &v).is_err());
        let (h, mut v) = random_instance(&mut rng, 2, 2, 4, 2);
        v.v[0] = CMatrix::zeros(3, 2);
        assert!(se_gradient(&h, &v).is_err());
    }
}
