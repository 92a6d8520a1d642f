//! Sparse approximation of the weighted kernel mean.
//!
//! The kernel mean `Σ_j w_j Φ(x_j)` is replaced by `Σ_{i∈I} α_i Φ(x_i)` over
//! a small index set `I`. For a given `I` the best coefficients solve the
//! Gram system `Ξ α = ξ`, with `Ξ_im = K(x_i, x_m)` and
//! `ξ_m = Σ_j w_j K(x_m, x_j)`.
//!
//! `I` is grown greedily. Let `c_j = max_{i∈I} K(x_i, x_j)` be how well the
//! subset already covers datum `j`, and `ν(I) = min_{j∉I} c_j` the coverage
//! of the worst covered datum (`ν = k(0)` once `I` holds everything). Each
//! step adds the worst covered datum, so `ν` never decreases. The normalised
//! `ν̃ = ν / k(0)` is recorded after every addition.
//!
//! `ν̃` rises from near 0 (distant data still uncovered) towards 1, and
//! consecutive values often tie because equal gaps are split one at a time.
//! The stopping rule therefore uses the mean gradient over the last doubling
//! of the subset,
//!
//! ```text
//! Δν̃(N) = (ν̃(N) - ν̃(⌊N/2⌋)) / (N - ⌊N/2⌋)
//! ```
//!
//! and stops at the first `N` with `Δν̃(N) ≤ T_ν`, keeping `N_ν = N`. The
//! rule is armed only once the gradient has exceeded `T_ν`, so the initial
//! flat stretch near 0 does not stop the growth. A subset that already
//! covers everything to within `T_ν` (`ν̃ ≥ 1 - T_ν`) stops at once.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::modeseek::{self, KernelProfile, Points, WeightVector};
use crate::{Error, Result};

/// Subset size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetStop {
    Fixed(usize),
    /// Gradient threshold `T_ν` on `ν̃`.
    Threshold(f64),
}

impl Default for SubsetStop {
    fn default() -> Self {
        SubsetStop::Threshold(1e-3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseBasis {
    /// Selected data indices, each with a positive coefficient.
    pub indices: Vec<usize>,
    /// Coefficients, positive and summing to 1.
    pub alphas: Vec<f64>,
    /// `ν̃` after each greedy addition.
    pub nu_trace: Vec<f64>,
    /// Subset size chosen by the stop rule, before zero coefficients were
    /// dropped.
    pub n: usize,
}

impl SparseBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sparse density `(1/h) Σ α_i k(‖(x - x_i)/h‖²)`.
    pub fn kde<K: KernelProfile + ?Sized>(&self, x: &[f64], data: &Points, k: &K) -> f64 {
        let s: f64 = self
            .indices
            .iter()
            .zip(&self.alphas)
            .map(|(&i, a)| a * k.eval(x, data.point(i)))
            .sum();
        k.density_norm() * s
    }
}

/// Row-major Gram matrix of the indexed points.
pub fn gram<K: KernelProfile + ?Sized>(data: &Points, indices: &[usize], k: &K) -> Vec<f64> {
    let n = indices.len();
    let mut g = vec![0.0; n * n];
    let k0 = k.profile(0.0);
    for a in 0..n {
        g[a * n + a] = k0;
        for b in a + 1..n {
            let v = k.eval(data.point(indices[a]), data.point(indices[b]));
            g[a * n + b] = v;
            g[b * n + a] = v;
        }
    }
    g
}

/// `ξ_m = Σ_j w_j K(x_m, x_j)` for each indexed point.
pub fn xi<K: KernelProfile + ?Sized>(
    data: &Points,
    indices: &[usize],
    w: &WeightVector,
    k: &K,
) -> Result<Vec<f64>> {
    if w.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            found: w.len(),
        });
    }
    Ok(indices
        .iter()
        .map(|&m| {
            let xm = data.point(m);
            data.iter()
                .zip(w.as_slice())
                .map(|(xj, wj)| wj * k.eval(xm, xj))
                .sum()
        })
        .collect())
}

/// Solves `Ξ α = ξ`, clips negative coefficients and renormalises.
/// Returns `(position, α)` pairs for the positive coefficients only.
pub fn solve_alpha(gram: &[f64], xi: &[f64]) -> Result<Vec<(usize, f64)>> {
    let n = xi.len();
    if gram.len() != n * n {
        return Err(Error::LengthMismatch {
            expected: n * n,
            found: gram.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("gram system"));
    }
    let sol = math::solve_spd(gram, n, xi).ok_or(Error::DegenerateBasis)?;
    let positive: Vec<(usize, f64)> = sol
        .x
        .into_iter()
        .enumerate()
        .filter(|(_, a)| *a > 0.0 && a.is_finite())
        .collect();
    let total: f64 = positive.iter().map(|(_, a)| a).sum();
    if positive.is_empty() || !(total > 0.0) {
        return Err(Error::DegenerateBasis);
    }
    Ok(positive.into_iter().map(|(i, a)| (i, a / total)).collect())
}

/// Greedy subset selection and coefficient solve.
///
/// The seed is the datum with the largest weighted kernel sum `ξ`. When the
/// subset is the whole data set, `α = w` solves the Gram system exactly and
/// is used directly, so the sparse variants reproduce the full ones.
pub fn select_subset<K: KernelProfile + ?Sized>(
    data: &Points,
    w: &WeightVector,
    k: &K,
    stop: SubsetStop,
) -> Result<SparseBasis> {
    let len = data.len();
    if len == 0 {
        return Err(Error::Empty("data"));
    }
    match stop {
        SubsetStop::Fixed(n) if n == 0 || n > len => {
            return Err(Error::InvalidConfig("subset size must be in 1..=L"))
        }
        SubsetStop::Threshold(t) if !(t > 0.0) => {
            return Err(Error::InvalidConfig("subset threshold must be positive"))
        }
        _ => {}
    }
    if stop == SubsetStop::Fixed(len) {
        let nu_trace = greedy_order(data, w, k, len, None)?.1;
        return Ok(SparseBasis {
            indices: (0..len).collect(),
            alphas: w.as_slice().to_vec(),
            nu_trace,
            n: len,
        });
    }
    let (order, nu_trace) = match stop {
        SubsetStop::Fixed(n) => greedy_order(data, w, k, n, None)?,
        SubsetStop::Threshold(t) => greedy_order(data, w, k, len, Some(t))?,
    };
    let n = match stop {
        SubsetStop::Fixed(n) => n,
        SubsetStop::Threshold(t) => stop_size(&nu_trace, t),
    };
    if n == len {
        return Ok(SparseBasis {
            indices: (0..len).collect(),
            alphas: w.as_slice().to_vec(),
            nu_trace,
            n,
        });
    }
    let subset = &order[..n];
    let g = gram(data, subset, k);
    let rhs = xi(data, subset, w, k)?;
    let solved = solve_alpha(&g, &rhs)?;
    Ok(SparseBasis {
        indices: solved.iter().map(|&(p, _)| subset[p]).collect(),
        alphas: solved.iter().map(|&(_, a)| a).collect(),
        nu_trace,
        n,
    })
}

/// `N_ν` for threshold `t` from a `ν̃` trace (`trace[N-1] = ν̃(N)`).
pub fn stop_size(nu_trace: &[f64], t: f64) -> usize {
    let mut rule = StopRule::new(t);
    (1..=nu_trace.len())
        .find(|&n| rule.fires(&nu_trace[..n]))
        .unwrap_or(nu_trace.len())
}

/// Gradient stop rule, fed one trace prefix at a time.
#[derive(Debug, Clone, Copy)]
struct StopRule {
    t: f64,
    armed: bool,
}

impl StopRule {
    fn new(t: f64) -> Self {
        Self { t, armed: false }
    }

    /// Whether growth stops at `N = trace.len()`.
    fn fires(&mut self, trace: &[f64]) -> bool {
        let n = trace.len();
        if trace[n - 1] >= 1.0 - self.t {
            return true;
        }
        if n < 2 {
            return false;
        }
        let half = n / 2;
        let slope = (trace[n - 1] - trace[half - 1]) / (n - half) as f64;
        if slope > self.t {
            self.armed = true;
            return false;
        }
        self.armed
    }
}

/// Greedy order of up to `limit` indices with the `ν̃` trace, cut short as
/// soon as the threshold rule `t` fires.
fn greedy_order<K: KernelProfile + ?Sized>(
    data: &Points,
    w: &WeightVector,
    k: &K,
    limit: usize,
    t: Option<f64>,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let len = data.len();
    let k0 = k.profile(0.0);
    let mut rule = t.map(StopRule::new);
    let all: Vec<usize> = (0..len).collect();
    let sums = xi(data, &all, w, k)?;
    let mut seed = 0;
    for (i, s) in sums.iter().enumerate() {
        if *s > sums[seed] {
            seed = i;
        }
    }
    let mut chosen = vec![false; len];
    let mut cover = vec![f64::NEG_INFINITY; len];
    let mut order = Vec::with_capacity(limit);
    let mut trace = Vec::with_capacity(limit);
    let mut next = seed;
    while order.len() < limit {
        chosen[next] = true;
        order.push(next);
        let xn = data.point(next);
        let mut worst = usize::MAX;
        let mut worst_c = f64::INFINITY;
        for j in 0..len {
            if chosen[j] {
                continue;
            }
            let c = k.eval(xn, data.point(j));
            if c > cover[j] {
                cover[j] = c;
            }
            if cover[j] < worst_c {
                worst_c = cover[j];
                worst = j;
            }
        }
        if worst == usize::MAX {
            trace.push(1.0);
            break;
        }
        trace.push(worst_c / k0);
        if let Some(rule) = rule.as_mut() {
            if rule.fires(&trace) {
                break;
            }
        }
        next = worst;
    }
    Ok((order, trace))
}

/// Sparse mean- or medoid-shift step. The medoid step returns the datum
/// minimising `Σ_i α_i g_i ‖y - x_i‖²`, i.e. the datum nearest to the
/// sparse weighted mean.
pub fn sparse_shift_step<K: KernelProfile + ?Sized>(
    x: &[f64],
    basis: &SparseBasis,
    data: &Points,
    k: &K,
    medoid: bool,
) -> Result<Vec<f64>> {
    let mut numer = vec![0.0; data.dim()];
    let mut denom = 0.0;
    for (&i, &a) in basis.indices.iter().zip(&basis.alphas) {
        let p = data.point(i);
        let c = a * k.shadow(k.scaled_dist2(x, p));
        denom += c;
        for (n, v) in numer.iter_mut().zip(p) {
            *n += c * v;
        }
    }
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::VanishingDenominator);
    }
    numer.iter_mut().for_each(|v| *v /= denom);
    if medoid {
        Ok(data.point(modeseek::nearest(data, &numer, k)).to_vec())
    } else {
        Ok(numer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeseek::GaussianKernel;

    fn k(h: f64) -> GaussianKernel {
        GaussianKernel::new(h).unwrap()
    }

    #[test]
    fn gram_examples() {
        let d = Points::from_scalars(&[1.5, 1.5]).unwrap();
        assert_eq!(gram(&d, &[0], &k(1.0)), vec![1.0]);
        assert_eq!(gram(&d, &[0, 1], &k(1.0)), vec![1.0; 4]);
    }

    #[test]
    fn xi_single_point() {
        let d = Points::from_scalars(&[0.3]).unwrap();
        assert_eq!(
            xi(&d, &[0], &WeightVector::uniform(1), &k(1.0)).unwrap(),
            vec![1.0]
        );
        assert!(xi(&d, &[0], &WeightVector::uniform(2), &k(1.0)).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(solve_alpha(&[1.0], &[0.37]).unwrap(), vec![(0, 1.0)]);
        let a = solve_alpha(&[1.0, 0.0, 0.0, 1.0], &[0.2, 0.8]).unwrap();
        assert_eq!(a[0].0, 0);
        assert!((a[0].1 - 0.2).abs() < 1e-15 && (a[1].1 - 0.8).abs() < 1e-15);
        assert!(matches!(
            solve_alpha(&[1.0], &[-1.0]),
            Err(Error::DegenerateBasis)
        ));
    }

    #[test]
    fn negative_coefficients_are_dropped() {
        let a = solve_alpha(&[1.0, 0.0, 0.0, 1.0], &[-0.5, 2.0]).unwrap();
        assert_eq!(a, vec![(1, 1.0)]);
    }

    #[test]
    fn repeated_value_keeps_one_point() {
        let d = Points::from_scalars(&[4.0; 30]).unwrap();
        for t in [1e-9, 1e-3, 0.5] {
            let b = select_subset(
                &d,
                &WeightVector::uniform(30),
                &k(0.5),
                SubsetStop::Threshold(t),
            )
            .unwrap();
            assert_eq!(b.n, 1);
            assert_eq!(b.alphas, vec![1.0]);
        }
    }

    #[test]
    fn stop_size_rule() {
        // never flattens
        assert_eq!(stop_size(&[0.1, 0.5, 0.9, 0.95], 1e-3), 4);
        // flat start is ignored, flat top stops
        let trace = [0.0, 0.0, 0.5, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9];
        assert_eq!(stop_size(&trace, 1e-3), 8);
        assert_eq!(stop_size(&[0.2, 0.9, 0.9995, 1.0], 1e-3), 3);
        assert_eq!(stop_size(&[1.0, 1.0], 1e-3), 1);
    }

    #[test]
    fn single_point_basis_returns_it() {
        let d = Points::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
        let b = SparseBasis {
            indices: vec![1],
            alphas: vec![1.0],
            nu_trace: vec![],
            n: 1,
        };
        assert_eq!(
            sparse_shift_step(&[1.7], &b, &d, &k(1.0), false).unwrap(),
            vec![1.0]
        );
    }
}
