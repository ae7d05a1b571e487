//! Weighted MMSE sum-rate maximization.
//!
//! Every update lives in the row space of the stacked channel: with `Q` an
//! orthonormal basis of `span(H_1ᴴ, …, H_Kᴴ)`, `H_k = (H_k Q) Qᴴ`, and the
//! precoder update `(A + μI)⁻¹ B` maps range(Q) into itself. The iteration
//! therefore runs on `r × d` blocks with `r ≤ Σ N_r`, which is exact and
//! independent of `M`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::reference::mrt;
use super::se::{covariances, sum_se, PrecoderSet};
use crate::channel::{CMatrix, ChannelSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Stop once the sum rate improves by less than this.
    pub tol: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WmmseResult {
    pub precoders: PrecoderSet,
    /// Sum rate of the starting point followed by one entry per iteration.
    pub trace: Vec<f64>,
}

impl WmmseResult {
    pub fn sum_rate(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

const BRACKET_DOUBLINGS: usize = 200;

/// Runs WMMSE from `init`, or from equal-power MRT when `init` is `None`.
pub fn wmmse_solve(
    h: &ChannelSet,
    power_budget: f64,
    noise_power: f64,
    init: Option<&PrecoderSet>,
    cfg: &WmmseConfig,
) -> Result<WmmseResult> {
    if !(power_budget > 0.0) || !(noise_power > 0.0) {
        return Err(Error::Invalid(format!(
            "wmmse: power budget {power_budget} and noise {noise_power} must be > 0"
        )));
    }
    let start = match init {
        Some(v) => {
            let mut v = v.clone();
            v.power_budget = power_budget;
            v.noise_power = noise_power;
            v
        }
        None => mrt(h, power_budget, noise_power)?,
    };
    if start.v.len() != h.n_users() || start.v.iter().zip(&h.h).any(|(v, hk)| v.nrows() != hk.ncols()) {
        return Err(Error::Invalid("wmmse: initial precoders do not match the channel".into()));
    }

    let m = h.n_tx();
    let rows: usize = h.h.iter().map(|hk| hk.nrows()).sum();
    let mut stacked_t = CMatrix::zeros(m, rows);
    let mut col = 0;
    for hk in &h.h {
        stacked_t.view_mut((0, col), (m, hk.nrows())).copy_from(&hk.adjoint());
        col += hk.nrows();
    }
    let q = stacked_t.qr().q();
    let g: Vec<CMatrix> = h.h.iter().map(|hk| hk * &q).collect();
    let mut w: Vec<CMatrix> = start.v.iter().map(|v| q.adjoint() * v).collect();
    let reduced = ChannelSet { h: g };

    let lift = |w: &[CMatrix]| PrecoderSet {
        v: w.iter().map(|wk| &q * wk).collect(),
        power_budget,
        noise_power,
    };
    let rate = |w: &[CMatrix]| {
        sum_se(
            &reduced,
            &PrecoderSet {
                v: w.to_vec(),
                power_budget,
                noise_power,
            },
        )
    };

    // Rates only see Qᴴ V, so the reduced start has the same sum rate.
    let mut current = rate(&w)?;
    let mut trace = vec![current];
    for _ in 0..cfg.max_iters {
        let next = wmmse_iteration(&reduced.h, &w, power_budget, noise_power)?;
        let r = rate(&next)?;
        let gain = r - current;
        w = next;
        current = r;
        trace.push(r);
        if gain < cfg.tol {
            break;
        }
    }
    Ok(WmmseResult {
        precoders: lift(&w),
        trace,
    })
}

/// One receive-filter, weight and precoder update.
fn wmmse_iteration(g: &[CMatrix], w: &[CMatrix], power_budget: f64, noise: f64) -> Result<Vec<CMatrix>> {
    let r = g[0].ncols();
    let mut a = CMatrix::zeros(r, r);
    let mut b = Vec::with_capacity(g.len());
    for (k, gk) in g.iter().enumerate() {
        let (total, _) = covariances(gk, w, k, noise);
        let hv = gk * &w[k];
        let u = total
            .lu()
            .solve(&hv)
            .ok_or_else(|| Error::Numerical("wmmse: singular receive covariance".into()))?;
        let d = hv.ncols();
        let e = CMatrix::identity(d, d) - u.adjoint() * &hv;
        // E is Hermitian positive definite in exact arithmetic.
        let e = (&e + e.adjoint()) * Complex64::new(0.5, 0.0);
        let weight = e
            .try_inverse()
            .ok_or_else(|| Error::Numerical("wmmse: singular MSE matrix".into()))?;
        let gu = gk.adjoint() * &u;
        a += &gu * &weight * gu.adjoint();
        b.push(&gu * &weight);
    }
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(a);
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let e = eig.eigenvectors;
    let widths: Vec<usize> = b.iter().map(|bk| bk.ncols()).collect();
    let total_cols: usize = widths.iter().sum();
    let mut bs = CMatrix::zeros(r, total_cols);
    let mut col = 0;
    for bk in &b {
        bs.view_mut((0, col), bk.shape()).copy_from(bk);
        col += bk.ncols();
    }
    let z = e.adjoint() * &bs;
    let z2: Vec<f64> = (0..r).map(|i| z.row(i).iter().map(|c| c.norm_sqr()).sum()).collect();
    let power = |mu: f64| -> f64 {
        lambda
            .iter()
            .zip(&z2)
            .map(|(&l, &zz)| {
                let den = l + mu;
                if zz == 0.0 {
                    0.0
                } else if den <= 0.0 {
                    f64::INFINITY
                } else {
                    zz / (den * den)
                }
            })
            .sum()
    };
    let mu = if power(0.0) <= power_budget {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut doublings = 0;
        while power(hi) > power_budget {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > BRACKET_DOUBLINGS || !hi.is_finite() {
                return Err(Error::Numerical(
                    "wmmse: could not bracket the power multiplier".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power(mid) > power_budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        r,
        lambda.iter().map(|&l| {
            let den = l + mu;
            if den > 0.0 {
                Complex64::new(1.0 / den, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }),
    ));
    let x = &e * scale * z;
    let mut out = Vec::with_capacity(widths.len());
    let mut col = 0;
    for wdt in widths {
        out.push(x.columns(col, wdt).into_owned());
        col += wdt;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channels(rng: &mut impl Rng, k: usize, nr: usize, m: usize) -> ChannelSet {
        ChannelSet::new(
            (0..k)
                .map(|_| {
                    CMatrix::from_fn(nr, m, |_, _| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_user_reaches_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h = random_channels(&mut rng, 1, 1, 5);
            let (p, noise) = (rng.random_range(0.5..2.0), rng.random_range(0.05..1.0));
            let res = wmmse_solve(&h, p, noise, None, &WmmseConfig::default()).unwrap();
            let want = (1.0 + p * h.h[0].norm_squared() / noise).log2();
            assert!((res.sum_rate() - want).abs() < 1e-6, "{} vs {want}", res.sum_rate());
            // Matched-filter direction.
            let v = &res.precoders.v[0];
            let cos = (h.h[0].clone() * v)[(0, 0)].norm() / (h.h[0].norm() * v.norm());
            assert!((cos - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn objective_is_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..20 {
            let (k, nr, m) = if trial % 2 == 0 { (4, 2, 16) } else { (3, 2, 4) };
            let h = random_channels(&mut rng, k, nr, m);
            let cfg = WmmseConfig {
                max_iters: 200,
                tol: 0.0,
            };
            let res = wmmse_solve(&h, 1.0, 0.1, None, &cfg).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
            }
            assert!(res.precoders.total_power() <= 1.0 + 1e-9);
            assert!((sum_se(&h, &res.precoders).unwrap() - res.sum_rate()).abs() < 1e-8);
        }
    }

    #[test]
    fn beats_references_and_warm_start_helps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_channels(&mut rng, 4, 2, 16);
        let cold = wmmse_solve(&h, 1.0, 0.1, None, &WmmseConfig::default()).unwrap();
        let m = sum_se(&h, &mrt(&h, 1.0, 0.1).unwrap()).unwrap();
        let z = sum_se(&h, &super::super::reference::zf(&h, 1.0, 0.1).unwrap()).unwrap();
        assert!(cold.sum_rate() > m && cold.sum_rate() > z);
        let warm = wmmse_solve(&h, 1.0, 0.1, Some(&cold.precoders), &WmmseConfig::default()).unwrap();
        assert!(warm.trace.len() < cold.trace.len());
        assert!(warm.sum_rate() >= cold.sum_rate() - 1e-9);
    }

    /// Best sum rate over `λ_k·MRT + (1−λ_k)·ZF` beam directions and the power
    /// split, each on a 200-point grid. For two single-antenna users the
    /// optimal beams lie on this family.
    fn grid_oracle(h: &ChannelSet, p: f64, noise: f64) -> f64 {
        let (h1, h2) = (h.h[0].transpose(), h.h[1].transpose());
        let unit = |v: CMatrix| {
            let n = v.norm();
            v / Complex64::new(n, 0.0)
        };
        let zf_dir = |a: &CMatrix, b: &CMatrix| {
            // Component of conj(a) orthogonal to conj(b).
            let (a, b) = (a.map(|c| c.conj()), b.map(|c| c.conj()));
            let coef = (b.adjoint() * &a)[(0, 0)] / Complex64::new(b.norm_squared(), 0.0);
            unit(&a - &b * coef)
        };
        let (mrt1, mrt2) = (unit(h1.map(|c| c.conj())), unit(h2.map(|c| c.conj())));
        let (zf1, zf2) = (zf_dir(&h1, &h2), zf_dir(&h2, &h1));
        let n = 200;
        let grid = |i: usize| i as f64 / (n - 1) as f64;
        // For each λ: |h_own·w|² and |h_other·w|².
        let gains = |mrt: &CMatrix, zf: &CMatrix, own: &CMatrix, other: &CMatrix| -> Vec<(f64, f64)> {
            (0..n)
                .map(|i| {
                    let l = grid(i);
                    let w = unit(mrt * Complex64::new(l, 0.0) + zf * Complex64::new(1.0 - l, 0.0));
                    let g_own = (own.transpose() * &w)[(0, 0)].norm_sqr();
                    let g_other = (other.transpose() * &w)[(0, 0)].norm_sqr();
                    (g_own, g_other)
                })
                .collect()
        };
        let b1 = gains(&mrt1, &zf1, &h1, &h2);
        let b2 = gains(&mrt2, &zf2, &h2, &h1);
        let mut best = 0.0f64;
        for &(a11, a21) in &b1 {
            for &(a22, a12) in &b2 {
                for si in 0..n {
                    let s = grid(si);
                    let (p1, p2) = (s * p, (1.0 - s) * p);
                    let r = (1.0 + p1 * a11 / (p2 * a12 + noise)).log2() + (1.0 + p2 * a22 / (p1 * a21 + noise)).log2();
                    best = best.max(r);
                }
            }
        }
        best
    }

    #[test]
    fn two_user_instances_reach_grid_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let h = random_channels(&mut rng, 2, 1, 2);
            let noise = rng.random_range(0.05..1.0);
            let oracle = grid_oracle(&h, 1.0, noise);
            let res = wmmse_solve(&h, 1.0, noise, None, &WmmseConfig::default()).unwrap();
            assert!(res.sum_rate() >= 0.98 * oracle, "{} vs oracle {oracle}", res.sum_rate());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_channels(&mut rng, 2, 1, 3);
        assert!(wmmse_solve(&h, 0.0, 0.1, None, &WmmseConfig::default()).is_err());
        assert!(wmmse_solve(&h, 1.0, 0.0, None, &WmmseConfig::default()).is_err());
        let wrong = PrecoderSet::zeros(2, 4, 1, 1.0, 0.1);
        assert!(wmmse_solve(&h, 1.0, 0.1, Some(&wrong), &WmmseConfig::default()).is_err());
    }
}
