//! Kernelised IRWLS for robust data weights.
//!
//! The weighted kernel mean `μ = Σ_j w_j Φ(x_j)` is re-estimated as an
//! M-estimate of location in feature space. The residual of datum `l` needs
//! kernel evaluations only:
//!
//! ```text
//! e_l² = ‖Φ(x_l) - μ‖² = k(0) - 2 Σ_j w_j K_lj + Σ_ij w_i w_j K_ij
//! ```
//!
//! With Huber's `ψ`, the IRWLS weight `σ̂ ψ(e/σ̂) / e` is `1` inside the core
//! `e ≤ c σ̂` and `c σ̂ / e` outside. Weights are renormalised to sum 1.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{KernelProfile, Points, WeightVector};
use crate::math;
use crate::{Error, Result};

/// Huber tuning constant for 95% asymptotic efficiency under Gaussian noise.
pub const HUBER_C: f64 = 1.345;

/// `sqrt(π/2)`, making the mean absolute deviation consistent for `σ`.
const MAD_CONSISTENCY: f64 = 1.2533;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustScale {
    /// `1.2533 · mean |e_l - median(e)|` of the uniform-weight residuals.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub huber_c: f64,
    pub scale: RobustScale,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            huber_c: HUBER_C,
            scale: RobustScale::Auto,
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.huber_c > 0.0) {
            return Err(Error::InvalidConfig("huber constant must be positive"));
        }
        if let RobustScale::Fixed(s) = self.scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidConfig("robust scale must be positive"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("irwls tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrwlsOutcome {
    pub weights: WeightVector,
    /// Scale used for every iteration.
    pub scale: f64,
    pub iterations: usize,
    /// `false` when `max_iters` ran out; `weights` is then the last iterate.
    pub converged: bool,
}

/// Robust weights by IRWLS from uniform initial weights.
pub fn irwls_weights<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    cfg: &RobustConfig,
) -> Result<IrwlsOutcome> {
    cfg.validate()?;
    let len = data.len();
    if len < 2 {
        return Err(Error::TooFew { len, min: 2 });
    }
    if k.bandwidths().len() != data.dim() {
        return Err(Error::LengthMismatch {
            expected: data.dim(),
            found: k.bandwidths().len(),
        });
    }
    let gram = crate::sparse::gram(data, &(0..len).collect::<Vec<_>>(), k);
    let k0 = k.profile(0.0);
    let uniform = WeightVector::uniform(len);
    let mut w = uniform.as_slice().to_vec();
    let mut s = vec![0.0; len];
    let mut e = vec![0.0; len];
    let mut scale = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        for (l, sl) in s.iter_mut().enumerate() {
            let row = &gram[l * len..(l + 1) * len];
            *sl = row.iter().zip(&w).map(|(g, w)| g * w).sum();
        }
        let q: f64 = w.iter().zip(&s).map(|(w, s)| w * s).sum();
        for (el, sl) in e.iter_mut().zip(&s) {
            *el = math::sqrt((k0 - 2.0 * sl + q).max(0.0));
        }
        let sigma = *scale.get_or_insert_with(|| match cfg.scale {
            RobustScale::Fixed(v) => v,
            RobustScale::Auto => {
                let med = math::median(&e);
                MAD_CONSISTENCY * e.iter().map(|v| (v - med).abs()).sum::<f64>() / len as f64
            }
        });
        if !(sigma > f64::EPSILON) {
            // No spread in the residuals: every datum is equally typical.
            return Ok(IrwlsOutcome {
                weights: uniform,
                scale: sigma,
                iterations,
                converged: true,
            });
        }
        let cut = cfg.huber_c * sigma;
        let mut next: Vec<f64> = e
            .iter()
            .map(|&el| if el <= cut { 1.0 } else { cut / el })
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        iterations += 1;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(IrwlsOutcome {
        weights: WeightVector::new(w)?,
        scale: scale.unwrap_or(0.0),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeseek::GaussianKernel;

    #[test]
    fn all_core_gives_exact_uniform() {
        let d = Points::from_scalars(&[0.0, 0.3, 0.5, 0.9, 1.0]).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let cfg = RobustConfig {
            scale: RobustScale::Fixed(10.0),
            ..Default::default()
        };
        let out = irwls_weights(&d, &k, &cfg).unwrap();
        assert_eq!(out.weights, WeightVector::uniform(5));
        assert!(out.converged);
    }

    #[test]
    fn identical_data_gives_uniform() {
        let d = Points::from_scalars(&[2.0; 7]).unwrap();
        let k = GaussianKernel::new(0.5).unwrap();
        let out = irwls_weights(&d, &k, &RobustConfig::default()).unwrap();
        assert_eq!(out.weights, WeightVector::uniform(7));
    }

    #[test]
    fn outlier_is_downweighted() {
        let mut v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 0.2).collect();
        v.push(5.0);
        let d = Points::from_scalars(&v).unwrap();
        let k = GaussianKernel::new(0.3).unwrap();
        let out = irwls_weights(&d, &k, &RobustConfig::default()).unwrap();
        let w = out.weights.as_slice();
        let inlier_min = w[..50].iter().copied().fold(f64::INFINITY, f64::min);
        assert!(w[50] < inlier_min);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let d = Points::from_scalars(&[0.0, 1.0]).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let bad = RobustConfig {
            scale: RobustScale::Fixed(0.0),
            ..Default::default()
        };
        assert!(irwls_weights(&d, &k, &bad).is_err());
        let one = Points::from_scalars(&[0.0]).unwrap();
        assert!(matches!(
            irwls_weights(&one, &k, &RobustConfig::default()),
            Err(Error::TooFew { .. })
        ));
    }

    /// Asymptotic efficiency of Huber's estimator under N(0,1),
    /// `(∫ψ' dΦ)² / ∫ψ² dΦ`, by midpoint quadrature.
    #[test]
    fn huber_constant_gives_95_percent_efficiency() {
        let c = HUBER_C;
        let n = 200_000;
        let (lo, hi) = (-12.0, 12.0);
        let dx = (hi - lo) / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * dx;
            let phi = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
            let psi = x.clamp(-c, c);
            if x.abs() <= c {
                num += phi * dx;
            }
            den += psi * psi * phi * dx;
        }
        let eff = num * num / den;
        assert!((eff - 0.95).abs() < 2e-3, "{eff}");
    }
}
