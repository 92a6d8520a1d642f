//! Remission to glucose calibration.
//!
//! The curve is piecewise linear through knots `(r_C, g)` sorted by
//! remission, with `g` strictly decreasing. Fitting averages the remission
//! of each glucose level, repairs order violations by pool-adjacent-
//! violators, and merges knots that end up at the same remission.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    /// `(r_C, g)` with `r_C` strictly increasing and `g` strictly
    /// decreasing.
    pub knots: Vec<(f64, f64)>,
    /// RFC 3339 timestamp, set by the caller.
    #[serde(default)]
    pub fitted_at: String,
    #[serde(default)]
    pub source_dataset: String,
}

impl CalibrationCurve {
    /// Checks the knot invariants.
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        let c = Self {
            knots,
            fitted_at: String::new(),
            source_dataset: String::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() < 2 {
            return Err(Error::TooFewLevels(self.knots.len()));
        }
        if self
            .knots
            .iter()
            .any(|(r, g)| !r.is_finite() || !g.is_finite())
        {
            return Err(Error::InvalidConfig("knots must be finite"));
        }
        if self
            .knots
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1))
        {
            return Err(Error::InvalidConfig(
                "knots must increase in remission and decrease in glucose",
            ));
        }
        Ok(())
    }

    /// Remission range covered by the knots.
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Piecewise-linear glucose estimate, clamped to the end knots and to
    /// non-negative values.
    pub fn map(&self, r_c: f64) -> f64 {
        let k = &self.knots;
        let g = if r_c <= k[0].0 {
            k[0].1
        } else if r_c >= k[k.len() - 1].0 {
            k[k.len() - 1].1
        } else {
            let i = k.partition_point(|&(r, _)| r <= r_c);
            let (r0, g0) = k[i - 1];
            let (r1, g1) = k[i];
            g0 + (g1 - g0) * (r_c - r0) / (r1 - r0)
        };
        g.max(0.0)
    }
}

/// Fits a curve to `(r_C, g)` observations; pairs with equal `g` form one
/// level.
pub fn fit(pairs: &[(f64, f64)]) -> Result<CalibrationCurve> {
    if pairs.iter().any(|(r, g)| !r.is_finite() || !g.is_finite()) {
        return Err(Error::InvalidConfig("calibration pairs must be finite"));
    }
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    // (g, mean r, count) per level, ascending in g
    let mut levels: Vec<(f64, f64, f64)> = Vec::new();
    for &(r, g) in &sorted {
        match levels.last_mut() {
            Some(last) if last.0 == g => {
                last.1 += r;
                last.2 += 1.0;
            }
            _ => levels.push((g, r, 1.0)),
        }
    }
    if levels.len() < 2 {
        return Err(Error::TooFewLevels(levels.len()));
    }
    for l in &mut levels {
        l.1 /= l.2;
    }

    // Pool adjacent violators: remission must decrease strictly in g, so
    // ties pool as well.
    // Blocks hold (sum w·r, sum w, first level, last level).
    let mut blocks: Vec<(f64, f64, usize, usize)> = Vec::new();
    for (i, &(_, r, w)) in levels.iter().enumerate() {
        blocks.push((r * w, w, i, i));
        while blocks.len() >= 2 {
            let b = blocks[blocks.len() - 1];
            let a = blocks[blocks.len() - 2];
            if b.0 / b.1 >= a.0 / a.1 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (a.0 + b.0, a.1 + b.1, a.2, b.3);
            } else {
                break;
            }
        }
    }

    // A pooled block becomes one knot at the weighted mean glucose.
    let mut knots: Vec<(f64, f64)> = blocks
        .iter()
        .map(|&(rs, w, first, last)| {
            let (gs, ws) = levels[first..=last]
                .iter()
                .fold((0.0, 0.0), |(gs, ws), &(g, _, c)| (gs + g * c, ws + c));
            (rs / w, gs / ws)
        })
        .collect();
    knots.reverse();
    if knots.len() < 2 {
        return Err(Error::TooFewLevels(knots.len()));
    }
    CalibrationCurve::from_knots(knots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_levels() {
        let c = fit(&[(90.0, 50.0), (60.0, 300.0)]).unwrap();
        assert_eq!(c.knots, vec![(60.0, 300.0), (90.0, 50.0)]);
        assert_eq!(c.map(75.0), 175.0);
        assert_eq!(c.map(90.0), 50.0);
        assert_eq!(c.map(60.0), 300.0);
        assert_eq!(c.map(10.0), 300.0);
        assert_eq!(c.map(99.0), 50.0);
    }

    #[test]
    fn level_means() {
        let c = fit(&[(90.0, 50.0), (92.0, 50.0), (60.0, 300.0), (62.0, 300.0)]).unwrap();
        assert_eq!(c.knots, vec![(61.0, 300.0), (91.0, 50.0)]);
    }

    #[test]
    fn violators_are_pooled() {
        // 100 mg/dl reads brighter than 50 mg/dl: the two levels pool.
        let c = fit(&[(80.0, 50.0), (84.0, 100.0), (60.0, 300.0)]).unwrap();
        assert_eq!(c.knots, vec![(60.0, 300.0), (82.0, 75.0)]);
    }

    #[test]
    fn too_few_levels() {
        assert_eq!(
            fit(&[(80.0, 50.0), (81.0, 50.0)]),
            Err(Error::TooFewLevels(1))
        );
        assert_eq!(
            fit(&[(80.0, 50.0), (84.0, 100.0)]),
            Err(Error::TooFewLevels(1))
        );
        assert!(CalibrationCurve::from_knots(vec![(1.0, 5.0), (2.0, 6.0)]).is_err());
    }
}
