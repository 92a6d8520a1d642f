//! Numeric helpers shared across modules.
//!
//! Transcendental functions go through `libm` so results are identical with
//! and without `std` and across platforms.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Upper tail of the standard normal, `Q(z) = P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley refinement step
/// against `erfc`, which brings the error to a few ulps over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * ln(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley step
    let e = 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * sqrt(2.0 * core::f64::consts::PI) * exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

/// `Q⁻¹(p)`: the z with `P(Z > z) = p`.
#[inline]
pub fn normal_isf(p: f64) -> f64 {
    -normal_quantile(p)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Ordinary least-squares line `y = slope * x + intercept`.
/// Returns `None` when all `x` coincide.
pub fn ols_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// In-place Cholesky factorisation of a symmetric `n x n` row-major matrix.
/// On success the lower triangle holds `L`. Fails when a pivot drops below
/// `min_pivot`.
fn cholesky_in_place(a: &mut [f64], n: usize, min_pivot: f64) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > min_pivot) {
            return false;
        }
        let d = sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solution of a symmetric positive semi-definite system.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// Diagonal loading that was needed for the factorisation to succeed.
    pub ridge: f64,
}

/// Solves `A x = b` for symmetric PSD `A` by Cholesky with two rounds of
/// iterative refinement. When `A` is numerically singular the diagonal is
/// loaded with `1e-8 * trace(A) / n`, growing tenfold until the
/// factorisation succeeds.
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Option<SpdSolution> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    if n == 0 {
        return Some(SpdSolution {
            x: Vec::new(),
            ridge: 0.0,
        });
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    if !(trace > 0.0) || !trace.is_finite() {
        return None;
    }
    let min_pivot = 1e-13 * trace / n as f64;
    let mut ridge = 0.0;
    let mut base_ridge = 1e-8 * trace / n as f64;
    for _ in 0..12 {
        let mut m = a.to_vec();
        for i in 0..n {
            m[i * n + i] += ridge;
        }
        if cholesky_in_place(&mut m, n, min_pivot) {
            let mut x = cholesky_solve(&m, n, b);
            for _ in 0..2 {
                let r: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut s = b[i] - ridge * x[i];
                        for j in 0..n {
                            s -= a[i * n + j] * x[j];
                        }
                        s
                    })
                    .collect();
                let dx = cholesky_solve(&m, n, &r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
            }
            return Some(SpdSolution { x, ridge });
        }
        ridge = base_ridge;
        base_ridge *= 10.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quantile_symmetry_and_center() {
        assert_eq!(normal_quantile(0.5), 0.0);
        for p in [1e-4, 0.01, 0.2, 0.4] {
            let a = normal_quantile(p);
            let b = normal_quantile(1.0 - p);
            assert!((a + b).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn quantile_inverts_sf() {
        for p in [1e-8, 1e-3, 0.01, 0.3, 0.77, 0.999] {
            let z = normal_isf(p);
            assert!((normal_sf(z) - p).abs() / p < 1e-12, "p={p}");
        }
    }

    #[test]
    fn spd_solve_identity() {
        let a = vec![1.0, 0.0, 0.0, 1.0];
        let s = solve_spd(&a, 2, &[0.2, 0.8]).unwrap();
        assert_eq!(s.ridge, 0.0);
        assert!((s.x[0] - 0.2).abs() < 1e-15 && (s.x[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn spd_solve_singular_gets_ridge() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let s = solve_spd(&a, 2, &[1.0, 1.0]).unwrap();
        assert!(s.ridge > 0.0);
        assert!((s.x[0] - s.x[1]).abs() < 1e-6);
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ols_two_points() {
        let (m, c) = ols_line(&[50.0, 90.0], &[-0.3, -0.1]).unwrap();
        assert!((m - 0.005).abs() < 1e-15);
        assert!((c + 0.55).abs() < 1e-14);
        assert!(ols_line(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }
}
