use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Largest exponent passed to `exp`; larger arguments are clamped.
pub const MAX_EXPONENT: f64 = 50.0;

/// Linear rate law `τ(r_C) = Δτ · r_C + τ₀` with measurement noise `σ_v²`.
///
/// `τ` is the signed decay exponent per frame: the curve is
/// `r(t) = (r_D - r_C) · exp(τ t) + r_C` with `t` in frames since the drop,
/// so `τ < 0` decays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticModelParams {
    pub delta_tau: f64,
    pub tau0: f64,
    pub sigma_v_sq: f64,
}

impl KineticModelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.delta_tau.is_finite() || !self.tau0.is_finite() {
            return Err(Error::InvalidConfig("kinetic parameters must be finite"));
        }
        if !(self.sigma_v_sq > 0.0) || !self.sigma_v_sq.is_finite() {
            return Err(Error::InvalidConfig(
                "measurement noise variance must be positive",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn tau(&self, r_c: f64) -> f64 {
        self.delta_tau * r_c + self.tau0
    }
}

/// `t · τ(r_C)` clamped to `±MAX_EXPONENT`, with a flag set when clamped.
#[inline]
pub(crate) fn exponent(t: f64, r_c: f64, params: &KineticModelParams) -> (f64, bool) {
    let a = t * params.tau(r_c);
    if a > MAX_EXPONENT {
        (MAX_EXPONENT, true)
    } else if a < -MAX_EXPONENT {
        (-MAX_EXPONENT, true)
    } else if a.is_nan() {
        (0.0, true)
    } else {
        (a, false)
    }
}

/// Noise-free kinetic curve `t` frames after the drop.
pub fn model_eval(t: f64, r_d: f64, r_c: f64, params: &KineticModelParams) -> f64 {
    let (a, _) = exponent(t, r_c, params);
    (r_d - r_c) * math::exp(a) + r_c
}

/// `∂r/∂r_C = 1 - E · (1 - t Δτ (r_D - r_C))` with `E = exp(t τ(r_C))`.
pub fn model_jacobian(t: f64, r_d: f64, r_c: f64, params: &KineticModelParams) -> f64 {
    let (a, _) = exponent(t, r_c, params);
    let e = math::exp(a);
    1.0 - e * (1.0 - t * params.delta_tau * (r_d - r_c))
}
