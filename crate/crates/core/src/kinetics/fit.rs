use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Least-squares fit of `r(t) = (r_D - r_C) · exp(τ t) + r_C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub r_d: f64,
    pub r_c: f64,
    /// Signed exponent per frame, negative for a decay.
    pub tau: f64,
    pub rms: f64,
    /// `SSE / (n - 3)`.
    pub residual_variance: f64,
    pub iterations: usize,
    /// `false` when the iteration budget ran out; the best iterate is kept.
    pub converged: bool,
}

/// Smallest number of samples accepted by [`fit_exponential`].
pub const MIN_FIT_SAMPLES: usize = 10;

const MAX_ITERS: usize = 500;

fn sse(y: &[f64], p: &[f64; 3]) -> f64 {
    let [a, c, k] = *p;
    y.iter()
        .enumerate()
        .map(|(t, &v)| {
            let r = v - ((a - c) * math::exp(-k * t as f64) + c);
            r * r
        })
        .sum()
}

/// Fits post-drop samples `y[t]`, `t = 0, 1, …` frames after the drop, by
/// Levenberg-Marquardt on `(r_D, r_C, κ)` with `κ = -τ > 0`.
///
/// Initialisation: `r_D = y[0]`, `r_C = y[last]`, and `κ` from a log-linear
/// fit of `|y - r_C|` over the samples still well away from `r_C`.
pub fn fit_exponential(y: &[f64]) -> Result<ExponentialFit> {
    let n = y.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::TooFew {
            len: n,
            min: MIN_FIT_SAMPLES,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("samples must be finite"));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = hi.abs().max(lo.abs()).max(1.0);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::Unidentifiable);
    }

    let a0 = y[0];
    let c0 = y[n - 1];
    let amp = (a0 - c0).abs();
    let sign = if a0 >= c0 { 1.0 } else { -1.0 };
    let (ts, ls): (Vec<f64>, Vec<f64>) = y
        .iter()
        .enumerate()
        .filter(|(_, &v)| sign * (v - c0) > 0.1 * amp)
        .map(|(t, &v)| (t as f64, math::ln(sign * (v - c0))))
        .unzip();
    let k0 = match math::ols_line(&ts, &ls) {
        Some((slope, _)) if slope < 0.0 => -slope,
        _ => 3.0 / n as f64,
    };

    let mut p = [a0, c0, k0];
    let mut cost = sse(y, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        iterations += 1;
        let [a, c, k] = p;
        let mut jtj = [0.0; 9];
        let mut jtr = [0.0; 3];
        for (t, &v) in y.iter().enumerate() {
            let t = t as f64;
            let e = math::exp(-k * t);
            let r = v - ((a - c) * e + c);
            let j = [e, 1.0 - e, -t * (a - c) * e];
            for row in 0..3 {
                jtr[row] += j[row] * r;
                for col in 0..3 {
                    jtj[row * 3 + col] += j[row] * j[col];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for d in 0..3 {
                m[d * 4] += lambda * jtj[d * 4].max(1e-12);
            }
            let Some(step) = math::solve_spd(&m, 3, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [a + step.x[0], c + step.x[1], k + step.x[2]];
            if !(cand[2] > 0.0) || cand.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let cand_cost = sse(y, &cand);
            if cand_cost <= cost {
                let rel = (cost - cand_cost) / cost.max(f64::MIN_POSITIVE);
                let small_step = step
                    .x
                    .iter()
                    .zip(&cand)
                    .all(|(d, v)| d.abs() <= 1e-12 * (v.abs() + 1e-12));
                p = cand;
                cost = cand_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-15 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // No downhill step at any damping: a numerically stationary point.
        if converged || !improved {
            converged = true;
            break;
        }
    }
    let [r_d, r_c, k] = p;
    Ok(ExponentialFit {
        r_d,
        r_c,
        tau: -k,
        rms: math::sqrt(cost / n as f64),
        residual_variance: cost / (n - 3) as f64,
        iterations,
        converged,
    })
}

/// Straight line `τ = Δτ · r_C + τ₀` through per-measurement fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRegression {
    pub delta_tau: f64,
    pub tau0: f64,
    /// Residual variance of `τ` about the line, `SSE / (n - 2)`; zero for
    /// two points.
    pub residual_variance: f64,
}

pub fn regress_tau(r_c: &[f64], tau: &[f64]) -> Result<TauRegression> {
    if r_c.len() != tau.len() {
        return Err(Error::LengthMismatch {
            expected: r_c.len(),
            found: tau.len(),
        });
    }
    if r_c.len() < 2 {
        return Err(Error::TooFew {
            len: r_c.len(),
            min: 2,
        });
    }
    let (slope, intercept) = math::ols_line(r_c, tau).ok_or(Error::SingularDesign)?;
    let sse: f64 = r_c
        .iter()
        .zip(tau)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let dof = r_c.len() as f64 - 2.0;
    Ok(TauRegression {
        delta_tau: slope,
        tau0: intercept,
        residual_variance: if dof > 0.0 { sse / dof } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(r_d: f64, r_c: f64, tau: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| (r_d - r_c) * libm::exp(tau * t as f64) + r_c)
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let y = curve(95.0, 60.0, -0.02, 300);
        let f = fit_exponential(&y).unwrap();
        assert!(f.converged);
        assert!((f.r_d - 95.0).abs() < 1e-6, "{f:?}");
        assert!((f.r_c - 60.0).abs() < 1e-6, "{f:?}");
        assert!((f.tau + 0.02).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn rising_curve() {
        let y = curve(40.0, 70.0, -0.05, 120);
        let f = fit_exponential(&y).unwrap();
        assert!((f.r_c - 70.0).abs() < 1e-6 && (f.tau + 0.05).abs() < 1e-6);
    }

    #[test]
    fn flat_is_unidentifiable() {
        assert_eq!(fit_exponential(&[80.0; 40]), Err(Error::Unidentifiable));
        assert!(matches!(
            fit_exponential(&[1.0, 2.0]),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn two_point_regression() {
        let r = regress_tau(&[50.0, 90.0], &[-0.3, -0.1]).unwrap();
        assert!((r.delta_tau - 0.005).abs() < 1e-15);
        assert!((r.tau0 + 0.55).abs() < 1e-14);
        assert_eq!(r.residual_variance, 0.0);
        assert_eq!(
            regress_tau(&[3.0, 3.0], &[1.0, 2.0]),
            Err(Error::SingularDesign)
        );
    }
}
