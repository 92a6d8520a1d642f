use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ConvergenceDecision, Method};
use crate::math;
use crate::{Error, Result};

/// Slope-threshold rule: the least-squares slope over the last `window`
/// post-drop frames (fewer right after the drop, at least 2) must stay
/// below `t_slope` in magnitude for `window` consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardConfig {
    pub t_slope: f64,
    pub window: usize,
}

impl Default for StandardConfig {
    fn default() -> Self {
        Self {
            t_slope: 1e-2,
            window: 15,
        }
    }
}

impl StandardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_slope > 0.0) {
            return Err(Error::InvalidConfig("slope threshold must be positive"));
        }
        if self.window < 2 {
            return Err(Error::InvalidConfig(
                "convergence window must be at least 2",
            ));
        }
        Ok(())
    }
}

/// Streaming form of [`standard_convergence`].
#[derive(Debug, Clone)]
pub struct StandardTracker {
    cfg: StandardConfig,
    recent: VecDeque<f64>,
    run: usize,
    decision: Option<ConvergenceDecision>,
}

impl StandardTracker {
    pub fn new(cfg: StandardConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            recent: VecDeque::with_capacity(cfg.window),
            run: 0,
            decision: None,
        })
    }

    pub fn decision(&self) -> Option<ConvergenceDecision> {
        self.decision
    }

    /// Feeds `r̂(n)` for consecutive post-drop frames, starting at `n_D`.
    pub fn push(&mut self, n: usize, r_hat: f64) -> Option<ConvergenceDecision> {
        if self.decision.is_some() {
            return self.decision;
        }
        if self.recent.len() == self.cfg.window {
            self.recent.pop_front();
        }
        self.recent.push_back(r_hat);
        if self.recent.len() < 2 {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .recent
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .unzip();
        let slope = math::ols_line(&xs, &ys).map_or(0.0, |(s, _)| s);
        if slope.abs() < self.cfg.t_slope {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= self.cfg.window {
            self.decision = Some(ConvergenceDecision {
                method: Method::Standard,
                n_c: n,
                r_c_hat: r_hat.clamp(0.0, 100.0),
            });
        }
        self.decision
    }
}

/// Applies the slope rule to post-drop estimates `r_hat[i] = r̂(n_D + i)`.
pub fn standard_convergence(
    r_hat: &[f64],
    n_d: usize,
    cfg: StandardConfig,
) -> Result<Option<ConvergenceDecision>> {
    let mut tracker = StandardTracker::new(cfg)?;
    for (i, &r) in r_hat.iter().enumerate() {
        if let Some(d) = tracker.push(n_d + i, r) {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

/// First position in a state history after which `|Δr̂_C| < tol` has held
/// for `window` consecutive steps. `history[i]` is the estimate after step
/// `i`; the step change at `i ≥ 1` is `history[i] - history[i-1]`.
pub fn ekf_convergence(history: &[f64], tol: f64, window: usize) -> Result<Option<usize>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("state tolerance must be positive"));
    }
    if window == 0 {
        return Err(Error::InvalidConfig("convergence window must be positive"));
    }
    let mut run = 0;
    for i in 1..history.len() {
        if (history[i] - history[i - 1]).abs() < tol {
            run += 1;
            if run >= window {
                return Ok(Some(i));
            }
        } else {
            run = 0;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_converges_after_window() {
        let cfg = StandardConfig::default();
        let d = standard_convergence(&[70.0; 100], 40, cfg)
            .unwrap()
            .unwrap();
        assert_eq!(d.n_c, 40 + cfg.window);
        assert_eq!(d.r_c_hat, 70.0);
        assert_eq!(d.method, Method::Standard);
    }

    #[test]
    fn steep_trace_is_pending() {
        let y: Vec<f64> = (0..50).map(|i| 100.0 - 0.5 * i as f64).collect();
        assert_eq!(
            standard_convergence(&y, 0, StandardConfig::default()).unwrap(),
            None
        );
    }

    #[test]
    fn rejects_bad_config() {
        let bad = StandardConfig {
            t_slope: 0.0,
            window: 15,
        };
        assert!(standard_convergence(&[1.0], 0, bad).is_err());
        let bad = StandardConfig {
            t_slope: 0.1,
            window: 1,
        };
        assert!(StandardTracker::new(bad).is_err());
    }

    #[test]
    fn constant_history_converges_after_window() {
        assert_eq!(ekf_convergence(&[5.0; 30], 0.01, 15).unwrap(), Some(15));
        assert_eq!(ekf_convergence(&[5.0; 15], 0.01, 15).unwrap(), None);
        let jumpy: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(ekf_convergence(&jumpy, 0.5, 3).unwrap(), None);
    }
}
