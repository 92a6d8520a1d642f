use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{exponent, model_eval, model_jacobian, KineticModelParams};
use super::{ConvergenceDecision, Method};
use crate::{Error, Result};

/// Scalar filter state for the static converged remission `r_C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfState {
    pub r_c_hat: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Frame of the last update.
    pub n: usize,
    /// Set when the last update had to clamp the model exponent.
    pub clamped: bool,
}

impl EkfState {
    pub fn new(r_c_hat: f64, p: f64, q: f64, r: f64, n: usize) -> Result<Self> {
        let s = Self {
            r_c_hat,
            p,
            q,
            r,
            n,
            clamped: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r_c_hat.is_finite() {
            return Err(Error::InvalidConfig("state estimate must be finite"));
        }
        if !(self.p >= 0.0) || !(self.q >= 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidConfig("need P >= 0, Q >= 0 and R > 0"));
        }
        Ok(())
    }
}

/// One predict/update cycle for the observation `r̂(n)`; `(n_d, r_d)` is
/// the curve's anchor, `t = n - n_d`.
///
/// Predict keeps `r̂_C` (static state) and adds `Q` to `P`. The update uses
/// the nonlinear model for the innovation and its derivative `H` for the
/// gain.
pub fn ekf_step(
    state: &EkfState,
    n: usize,
    r_hat: f64,
    n_d: usize,
    r_d: f64,
    params: &KineticModelParams,
) -> Result<EkfState> {
    if n < n_d {
        return Err(Error::InvalidConfig(
            "observation precedes the anchor frame",
        ));
    }
    if !r_hat.is_finite() || !r_d.is_finite() {
        return Err(Error::InvalidConfig("observation must be finite"));
    }
    let t = (n - n_d) as f64;
    let x = state.r_c_hat;
    let p = state.p + state.q;
    let (_, clamped) = exponent(t, x, params);
    let h = model_jacobian(t, r_d, x, params);
    let innovation = r_hat - model_eval(t, r_d, x, params);
    let s = h * h * p + state.r;
    let gain = if s.is_finite() { p * h / s } else { 0.0 };
    Ok(EkfState {
        r_c_hat: x + gain * innovation,
        p: ((1.0 - gain * h) * p).max(0.0),
        q: state.q,
        r: state.r,
        n,
        clamped,
    })
}

/// Where the model curve is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// `(n_D, r̂(n_D))`.
    Drop,
    /// The first filtered frame `(n_D + w_skip, r̂(n_D + w_skip))`. The
    /// exponential is memoryless, so the same curve passes through it.
    Start,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfConfig {
    pub q: f64,
    pub p0: f64,
    /// Measurement noise variance; `None` takes `σ_v²` from the model.
    pub r: Option<f64>,
    /// Post-drop frames skipped before filtering starts.
    pub w_skip: usize,
    /// The initial estimate is the first filtered `r̂` minus this offset.
    pub init_offset: f64,
    pub tol_state: f64,
    pub window: usize,
    pub anchor: Anchor,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            q: 1e-4,
            p0: 25.0,
            r: None,
            w_skip: 10,
            init_offset: 5.0,
            tol_state: 1e-2,
            window: 15,
            anchor: Anchor::Start,
        }
    }
}

impl EkfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) || !(self.p0 >= 0.0) {
            return Err(Error::InvalidConfig("need Q >= 0 and P0 >= 0"));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig("R must be positive"));
            }
        }
        if !(self.tol_state > 0.0) {
            return Err(Error::InvalidConfig("state tolerance must be positive"));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("convergence window must be positive"));
        }
        Ok(())
    }
}

/// Streaming filter with the state-change convergence rule.
#[derive(Debug, Clone)]
pub struct EkfTracker {
    cfg: EkfConfig,
    params: KineticModelParams,
    n_d: usize,
    anchor: Option<(usize, f64)>,
    state: Option<EkfState>,
    history: Vec<EkfState>,
    run: usize,
    decision: Option<ConvergenceDecision>,
}

impl EkfTracker {
    pub fn new(cfg: EkfConfig, params: KineticModelParams, n_d: usize) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        Ok(Self {
            cfg,
            params,
            n_d,
            anchor: None,
            state: None,
            history: Vec::new(),
            run: 0,
            decision: None,
        })
    }

    pub fn state(&self) -> Option<&EkfState> {
        self.state.as_ref()
    }

    /// State after every update.
    pub fn history(&self) -> &[EkfState] {
        &self.history
    }

    pub fn decision(&self) -> Option<ConvergenceDecision> {
        self.decision
    }

    /// Feeds `r̂(n)` for consecutive frames `n ≥ n_D`.
    pub fn push(&mut self, n: usize, r_hat: f64) -> Result<Option<ConvergenceDecision>> {
        if self.decision.is_some() || n < self.n_d {
            return Ok(self.decision);
        }
        if n == self.n_d && self.cfg.anchor == Anchor::Drop {
            self.anchor = Some((n, r_hat));
        }
        if n < self.n_d + self.cfg.w_skip {
            return Ok(None);
        }
        let prev = match self.state {
            Some(s) => s,
            None => {
                if self.anchor.is_none() {
                    self.anchor = Some((n, r_hat));
                }
                let r = self.cfg.r.unwrap_or(self.params.sigma_v_sq);
                EkfState::new(r_hat - self.cfg.init_offset, self.cfg.p0, self.cfg.q, r, n)?
            }
        };
        let (n_a, r_a) = self.anchor.unwrap_or((self.n_d, r_hat));
        let next = ekf_step(&prev, n, r_hat, n_a, r_a, &self.params)?;
        if self.state.is_some() && (next.r_c_hat - prev.r_c_hat).abs() < self.cfg.tol_state {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.state = Some(next);
        self.history.push(next);
        if self.run >= self.cfg.window {
            self.decision = Some(ConvergenceDecision {
                method: Method::Ekf,
                n_c: n,
                r_c_hat: next.r_c_hat.clamp(0.0, 100.0),
            });
        }
        Ok(self.decision)
    }
}

/// Runs the filter over stored post-drop estimates `r_hat[i] = r̂(n_D + i)`
/// until convergence.
pub fn run_ekf(
    r_hat: &[f64],
    n_d: usize,
    params: &KineticModelParams,
    cfg: EkfConfig,
) -> Result<(Option<ConvergenceDecision>, Vec<EkfState>)> {
    let mut tracker = EkfTracker::new(cfg, *params, n_d)?;
    for (i, &r) in r_hat.iter().enumerate() {
        if tracker.push(n_d + i, r)?.is_some() {
            break;
        }
    }
    Ok((tracker.decision, tracker.history))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: KineticModelParams = KineticModelParams {
        delta_tau: 0.00024,
        tau0: -0.0308,
        sigma_v_sq: 0.01,
    };

    #[test]
    fn infinite_r_freezes_state() {
        let s = EkfState::new(70.0, 4.0, 0.0, f64::INFINITY, 10).unwrap();
        let next = ekf_step(&s, 30, 55.0, 0, 95.0, &P).unwrap();
        assert_eq!(next.r_c_hat, 70.0);
        assert_eq!(next.p, 4.0);
    }

    #[test]
    fn variance_non_increasing_without_process_noise() {
        let mut s = EkfState::new(65.0, 25.0, 0.0, 0.01, 0).unwrap();
        for n in 1..200 {
            let y = model_eval(n as f64, 95.0, 60.0, &P);
            let next = ekf_step(&s, n, y, 0, 95.0, &P).unwrap();
            assert!(next.p >= 0.0 && next.p <= s.p);
            s = next;
        }
        assert!((s.r_c_hat - 60.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_invalid_state() {
        assert!(EkfState::new(1.0, -1.0, 0.0, 1.0, 0).is_err());
        assert!(EkfState::new(1.0, 1.0, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn tracker_skips_then_converges() {
        let y: Vec<f64> = (0..400)
            .map(|t| model_eval(t as f64, 95.0, 60.0, &P))
            .collect();
        let (d, hist) = run_ekf(&y, 100, &P, EkfConfig::default()).unwrap();
        let d = d.unwrap();
        assert_eq!(hist[0].n, 110);
        assert!((d.r_c_hat - 60.0).abs() < 0.1, "{d:?}");
        assert_eq!(d.method, Method::Ekf);
    }
}
