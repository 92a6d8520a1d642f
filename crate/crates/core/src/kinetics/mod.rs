//! Kinetic curve model, curve fitting and convergence prediction.
//!
//! After the drop the remission decays exponentially towards its converged
//! value `r_C`, at a rate that depends linearly on `r_C`:
//!
//! ```text
//! r(t) = (r_D - r_C) · exp(τ t) + r_C,   τ = Δτ · r_C + τ₀ < 0
//! ```
//!
//! with `t = n - n_D` frames since the drop. Two rules decide when `r_C` is
//! known: the classic slope threshold on the observed curve, and an
//! extended Kalman filter that estimates `r_C` directly as a static state.

mod convergence;
mod ekf;
mod fit;
mod model;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use convergence::{ekf_convergence, standard_convergence, StandardConfig, StandardTracker};
pub use ekf::{ekf_step, run_ekf, Anchor, EkfConfig, EkfState, EkfTracker};
pub use fit::{fit_exponential, regress_tau, ExponentialFit, TauRegression, MIN_FIT_SAMPLES};
pub use model::{model_eval, model_jacobian, KineticModelParams, MAX_EXPONENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Standard,
    Ekf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDecision {
    pub method: Method,
    pub n_c: usize,
    pub r_c_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    PreDrop,
    Decay,
    Converged,
}

/// Per-frame remission estimates of one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticTrace {
    /// Frame index of `r_hat[0]`.
    pub start: usize,
    pub r_hat: Vec<f64>,
    pub stages: Vec<Stage>,
    pub n_d: Option<usize>,
    pub n_c: Option<usize>,
}

impl KineticTrace {
    pub fn new(start: usize) -> Self {
        Self {
            start,
            r_hat: Vec::new(),
            stages: Vec::new(),
            n_d: None,
            n_c: None,
        }
    }

    pub fn push(&mut self, r_hat: f64, stage: Stage) {
        self.r_hat.push(r_hat);
        self.stages.push(stage);
    }

    /// Estimates from `n_D` on.
    pub fn post_drop(&self) -> &[f64] {
        match self.n_d {
            Some(n_d) if n_d >= self.start => {
                &self.r_hat[(n_d - self.start).min(self.r_hat.len())..]
            }
            _ => &[],
        }
    }

    /// `r̂(n_D)`.
    pub fn r_d(&self) -> Option<f64> {
        self.post_drop().first().copied()
    }
}
