use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Radially symmetric kernel `K(x) = k(‖x/h‖²)` with profile `k` and
/// shadow `g = -k'`.
pub trait KernelProfile {
    /// Per-dimension bandwidths.
    fn bandwidths(&self) -> &[f64];

    /// Profile `k(u)`.
    fn profile(&self, u: f64) -> f64;

    /// `g(u) = -k'(u)`, positive for a decreasing profile.
    fn shadow(&self, u: f64) -> f64;

    fn profile_and_shadow(&self, u: f64) -> (f64, f64) {
        (self.profile(u), self.shadow(u))
    }

    /// Bandwidth-scaled squared distance `Σ_d ((a_d - b_d) / h_d)²`.
    fn scaled_dist2(&self, a: &[f64], b: &[f64]) -> f64;

    /// Leading factor of the density estimate, `1/h` of the first axis.
    fn density_norm(&self) -> f64 {
        1.0 / self.bandwidths()[0]
    }

    /// `K((a - b)/h)`, the kernel as an inner product in feature space.
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.profile(self.scaled_dist2(a, b))
    }
}

/// Gaussian kernel, `k(u) = exp(-u/2)`, `g(u) = k(u)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GaussianKernel {
    bandwidths: Vec<f64>,
    inv: Vec<f64>,
}

impl GaussianKernel {
    /// One-dimensional kernel with bandwidth `h`.
    pub fn new(h: f64) -> Result<Self> {
        Self::with_bandwidths(alloc::vec![h])
    }

    pub fn with_bandwidths(bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::Empty("bandwidths"));
        }
        if bandwidths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidConfig("bandwidth must be positive"));
        }
        let inv = bandwidths.iter().map(|h| 1.0 / h).collect();
        Ok(Self { bandwidths, inv })
    }

    pub fn h(&self) -> f64 {
        self.bandwidths[0]
    }

    pub fn dim(&self) -> usize {
        self.bandwidths.len()
    }
}

impl TryFrom<Vec<f64>> for GaussianKernel {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::with_bandwidths(v)
    }
}

impl From<GaussianKernel> for Vec<f64> {
    fn from(k: GaussianKernel) -> Self {
        k.bandwidths
    }
}

impl KernelProfile for GaussianKernel {
    fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    #[inline]
    fn profile(&self, u: f64) -> f64 {
        math::exp(-0.5 * u)
    }

    #[inline]
    fn shadow(&self, u: f64) -> f64 {
        0.5 * math::exp(-0.5 * u)
    }

    #[inline]
    fn profile_and_shadow(&self, u: f64) -> (f64, f64) {
        let k = math::exp(-0.5 * u);
        (k, 0.5 * k)
    }

    #[inline]
    fn scaled_dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.inv.len() == 1 {
            let d = (a[0] - b[0]) * self.inv[0];
            return d * d;
        }
        a.iter()
            .zip(b)
            .zip(&self.inv)
            .map(|((x, y), s)| {
                let d = (x - y) * s;
                d * d
            })
            .sum()
    }
}

impl<K: KernelProfile + ?Sized> KernelProfile for &K {
    fn bandwidths(&self) -> &[f64] {
        (**self).bandwidths()
    }
    fn profile(&self, u: f64) -> f64 {
        (**self).profile(u)
    }
    fn shadow(&self, u: f64) -> f64 {
        (**self).shadow(u)
    }
    fn profile_and_shadow(&self, u: f64) -> (f64, f64) {
        (**self).profile_and_shadow(u)
    }
    fn scaled_dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        (**self).scaled_dist2(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_convex_and_decreasing() {
        let k = GaussianKernel::new(1.0).unwrap();
        let us: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        for w in us.windows(3) {
            let (a, b, c) = (k.profile(w[0]), k.profile(w[1]), k.profile(w[2]));
            assert!(b < a && c < b);
            assert!(a + c >= 2.0 * b);
        }
        assert_eq!(k.profile(0.0), 1.0);
    }

    #[test]
    fn shadow_matches_negative_derivative() {
        let k = GaussianKernel::new(0.7).unwrap();
        for &u in &[0.0, 0.3, 1.0, 4.0, 9.5] {
            let eps = 1e-6;
            let fd = -(k.profile(u + eps) - k.profile((u - eps).max(0.0)))
                / (u + eps - (u - eps).max(0.0));
            assert!((fd - k.shadow(u)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_bandwidth() {
        assert!(GaussianKernel::new(0.0).is_err());
        assert!(GaussianKernel::new(-1.0).is_err());
        assert!(GaussianKernel::with_bandwidths(Vec::new()).is_err());
    }

    #[test]
    fn per_axis_scaling() {
        let k = GaussianKernel::with_bandwidths(alloc::vec![2.0, 1.0, 4.0]).unwrap();
        assert_eq!(k.scaled_dist2(&[2.0, 1.0, 4.0], &[0.0, 0.0, 0.0]), 3.0);
    }
}
