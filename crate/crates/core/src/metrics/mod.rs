//! Accuracy metrics: remission coefficient of variation, Clarke error grid,
//! glucose-specific mean absolute deviation and ISO limits.

mod ceg;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

pub use ceg::{ceg_zone, Zone};

/// Mean over groups of the per-group coefficient of variation in percent,
/// `100 · s / mean` with the `n - 1` standard deviation.
pub fn cv_remission(groups: &[Vec<f64>]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Empty("groups"));
    }
    let mut total = 0.0;
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::TooFew {
                len: g.len(),
                min: 2,
            });
        }
        let m = math::mean(g);
        if !(m > 0.0) {
            return Err(Error::NonPositiveMean(i));
        }
        total += 100.0 * math::sqrt(math::sample_variance(g)) / m;
    }
    Ok(total / groups.len() as f64)
}

/// Logistic sigmoids of the severity weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmadConfig {
    /// Logistic width `s` in mg/dl.
    pub width: f64,
    pub low: f64,
    pub high: f64,
    /// Extra weight for overestimating a low reference.
    pub low_gain: f64,
    /// Extra weight for underestimating a high reference.
    pub high_gain: f64,
}

impl Default for GmadConfig {
    fn default() -> Self {
        Self {
            width: 10.0,
            low: 85.0,
            high: 155.0,
            low_gain: 1.5,
            high_gain: 1.0,
        }
    }
}

impl GmadConfig {
    /// `σ(u) = 1 / (1 + exp(-(u - u₀)/s))`.
    pub fn sigmoid(&self, u: f64, u0: f64) -> f64 {
        1.0 / (1.0 + math::exp(-(u - u0) / self.width))
    }

    /// Severity weight, `≥ 1`:
    ///
    /// ```text
    /// 1 + 1.5 · σ̄_low(g) · σ_low(ĝ)    g ≤ 85, ĝ ≥ g
    /// 1 + 1.0 · σ_high(g) · σ̄_high(ĝ)  g ≥ 155, ĝ ≤ g
    /// 1                                otherwise
    /// ```
    pub fn weight(&self, g: f64, g_hat: f64) -> f64 {
        if g <= self.low && g_hat >= g {
            1.0 + self.low_gain * (1.0 - self.sigmoid(g, self.low)) * self.sigmoid(g_hat, self.low)
        } else if g >= self.high && g_hat <= g {
            1.0 + self.high_gain
                * self.sigmoid(g, self.high)
                * (1.0 - self.sigmoid(g_hat, self.high))
        } else {
            1.0
        }
    }
}

/// Mean severity-weighted absolute deviation over `(g, ĝ)` pairs.
pub fn gmad(pairs: &[(f64, f64)], cfg: &GmadConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("pairs"));
    }
    let s: f64 = pairs
        .iter()
        .map(|&(g, e)| (g - e).abs() * cfg.weight(g, e))
        .sum();
    Ok(s / pairs.len() as f64)
}

/// ISO limits: `±15 mg/dl` up to 75 mg/dl, `±20 %` above.
pub fn iso_pass(g: f64, g_hat: f64) -> bool {
    let err = (g - g_hat).abs();
    if g <= 75.0 {
        err <= 15.0
    } else {
        err <= 0.2 * g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoCheck {
    pub pass: bool,
    pub per_pair: Vec<bool>,
    pub pass_rate: f64,
}

pub fn iso_check(pairs: &[(f64, f64)]) -> IsoCheck {
    let per_pair: Vec<bool> = pairs.iter().map(|&(g, e)| iso_pass(g, e)).collect();
    let passed = per_pair.iter().filter(|&&p| p).count();
    IsoCheck {
        pass: passed == per_pair.len(),
        pass_rate: if per_pair.is_empty() {
            1.0
        } else {
            passed as f64 / per_pair.len() as f64
        },
        per_pair,
    }
}

/// Reference split between the low and high gMAD ranges (mg/dl).
pub const GMAD_SPLIT: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub measurements: usize,
    /// Absent when no glucose level has two estimates.
    pub cv_r: Option<f64>,
    pub gmad: f64,
    /// References `≤ 75` mg/dl; absent without such references.
    pub gmad_low: Option<f64>,
    pub gmad_high: Option<f64>,
    /// Counts for zones A to E.
    pub ceg_counts: [usize; 5],
    pub ceg_zone_a_fraction: f64,
    /// At least 95 % in A, at most 5 % in B, none in C to E.
    pub ceg_compliant: bool,
    pub iso_pass: bool,
    pub iso_pass_rate: f64,
}

/// Aggregates `(g, ĝ)` pairs and the converged remission of each
/// measurement, grouped by reference glucose for the CV.
pub fn evaluate(pairs: &[(f64, f64)], r_c: &[f64], cfg: &GmadConfig) -> Result<EvaluationReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("pairs"));
    }
    if pairs.len() != r_c.len() {
        return Err(Error::LengthMismatch {
            expected: pairs.len(),
            found: r_c.len(),
        });
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut last_g = f64::NAN;
    for &i in &order {
        if pairs[i].0 != last_g {
            groups.push(Vec::new());
            last_g = pairs[i].0;
        }
        groups.last_mut().expect("pushed above").push(r_c[i]);
    }
    groups.retain(|g| g.len() >= 2);
    let cv_r = if groups.is_empty() {
        None
    } else {
        Some(cv_remission(&groups)?)
    };

    let (low, high) = pairs
        .iter()
        .partition::<Vec<(f64, f64)>, _>(|&&(g, _)| g <= GMAD_SPLIT);
    let mut ceg_counts = [0usize; 5];
    for &(g, e) in pairs {
        ceg_counts[ceg_zone(g, e).index()] += 1;
    }
    let n = pairs.len() as f64;
    let frac_a = ceg_counts[0] as f64 / n;
    let frac_b = ceg_counts[1] as f64 / n;
    let iso = iso_check(pairs);
    Ok(EvaluationReport {
        measurements: pairs.len(),
        cv_r,
        gmad: gmad(pairs, cfg)?,
        gmad_low: gmad(&low, cfg).ok(),
        gmad_high: gmad(&high, cfg).ok(),
        ceg_counts,
        ceg_zone_a_fraction: frac_a,
        ceg_compliant: frac_a >= 0.95 && frac_b <= 0.05 && ceg_counts[2..].iter().all(|&c| c == 0),
        iso_pass: iso.pass,
        iso_pass_rate: iso.pass_rate,
    })
}
