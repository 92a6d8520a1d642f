//! Weighted kernel mode seeking.
//!
//! Every datum is moved uphill on the weighted kernel density estimate
//!
//! ```text
//! f(x) = (1/h) Σ_l w_l k(‖(x - x_l)/h‖²)
//! ```
//!
//! until it reaches a mode. Mean-shift moves to the `g`-weighted mean of the
//! data; medoid-shift moves to the datum that minimises the `g`-weighted sum
//! of squared distances, which is the datum closest to that same mean. Robust
//! variants replace uniform weights with IRWLS weights, sparse variants
//! replace the data sum with a small weighted basis (see [`crate::sparse`]).

mod kernel;
mod prune;
mod robust;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frames::Frame;
use crate::sparse::{self, SparseBasis, SubsetStop};
use crate::{Error, Result};

pub use kernel::{GaussianKernel, KernelProfile};
pub use prune::{prune_modes, ClusterSet, Representative};
pub use robust::{irwls_weights, IrwlsOutcome, RobustConfig, RobustScale, HUBER_C};

/// Row-major set of `len` points of dimension `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("point dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::LengthMismatch {
                expected: (data.len() / dim + 1) * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("points must be finite"));
        }
        Ok(Self { dim, data })
    }

    /// One-dimensional points.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    /// Feature vectors of a frame in vectorised order: the intensity alone,
    /// or `(intensity, row, col)` when `spatial` is set.
    pub fn from_frame(frame: &Frame, spatial: bool) -> Self {
        if !spatial {
            return Self {
                dim: 1,
                data: frame.pixels().to_vec(),
            };
        }
        let rows = frame.rows();
        let data = frame
            .pixels()
            .iter()
            .enumerate()
            .flat_map(|(i, &v)| [v, (i % rows) as f64, (i / rows) as f64])
            .collect();
        Self { dim: 3, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Gathers the given rows.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// Strictly positive, finite data weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("weights"));
        }
        if let Some(index) = w.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveWeight { index });
        }
        Ok(Self(w))
    }

    /// `1/L` everywhere, bit-identical for every entry.
    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// The eight mode seeking variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ms,
    Rms,
    Meds,
    Rmeds,
    Ssms,
    Rssms,
    Ssmeds,
    Rssmeds,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Ms,
        Variant::Rms,
        Variant::Meds,
        Variant::Rmeds,
        Variant::Ssms,
        Variant::Rssms,
        Variant::Ssmeds,
        Variant::Rssmeds,
    ];

    pub fn is_robust(self) -> bool {
        matches!(self, Self::Rms | Self::Rmeds | Self::Rssms | Self::Rssmeds)
    }

    pub fn is_sparse(self) -> bool {
        matches!(
            self,
            Self::Ssms | Self::Rssms | Self::Ssmeds | Self::Rssmeds
        )
    }

    pub fn is_medoid(self) -> bool {
        matches!(
            self,
            Self::Meds | Self::Rmeds | Self::Ssmeds | Self::Rssmeds
        )
    }

    /// Lower-case command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Self::Ms => "ms",
            Self::Rms => "rms",
            Self::Meds => "meds",
            Self::Rmeds => "rmeds",
            Self::Ssms => "ssms",
            Self::Rssms => "rssms",
            Self::Ssmeds => "ssmeds",
            Self::Rssmeds => "rssmeds",
        }
    }

    /// Conventional label, e.g. `RSS-MedS`.
    pub fn label(self) -> &'static str {
        match self {
            Self::Ms => "MS",
            Self::Rms => "R-MS",
            Self::Meds => "MedS",
            Self::Rmeds => "R-MedS",
            Self::Ssms => "SS-MS",
            Self::Rssms => "RSS-MS",
            Self::Ssmeds => "SS-MedS",
            Self::Rssmeds => "RSS-MedS",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.label().eq_ignore_ascii_case(s))
            .ok_or(Error::InvalidConfig("unknown mode seeking variant"))
    }
}

/// Weighted sums of `K` and `g` around `x`. Writes `Σ a_i g_i x_i` into
/// `numer` and returns `(Σ a_i k_i, Σ a_i g_i)`.
#[inline]
fn accumulate<'a, K, I>(x: &[f64], terms: I, k: &K, numer: &mut [f64]) -> (f64, f64)
where
    K: KernelProfile + ?Sized,
    I: Iterator<Item = (&'a [f64], f64)>,
{
    numer.iter_mut().for_each(|v| *v = 0.0);
    let mut dens = 0.0;
    let mut denom = 0.0;
    for (p, a) in terms {
        let (kv, gv) = k.profile_and_shadow(k.scaled_dist2(x, p));
        dens += a * kv;
        let c = a * gv;
        denom += c;
        for (n, v) in numer.iter_mut().zip(p) {
            *n += c * v;
        }
    }
    (dens, denom)
}

/// Index of the datum closest to `target` in the kernel metric; ties go to
/// the lowest index.
pub fn nearest<K: KernelProfile + ?Sized>(data: &Points, target: &[f64], k: &K) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in data.iter().enumerate() {
        let d = k.scaled_dist2(target, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn check_inputs<K: KernelProfile + ?Sized>(
    x: &[f64],
    data: &Points,
    w: &WeightVector,
    k: &K,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    if w.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            found: w.len(),
        });
    }
    if x.len() != data.dim() || k.bandwidths().len() != data.dim() {
        return Err(Error::LengthMismatch {
            expected: data.dim(),
            found: if x.len() != data.dim() {
                x.len()
            } else {
                k.bandwidths().len()
            },
        });
    }
    Ok(())
}

fn full_terms<'a>(data: &'a Points, w: &'a WeightVector) -> impl Iterator<Item = (&'a [f64], f64)> {
    data.iter().zip(w.as_slice().iter().copied())
}

/// Weighted kernel density estimate at `x`.
pub fn kde<K: KernelProfile + ?Sized>(
    x: &[f64],
    data: &Points,
    w: &WeightVector,
    k: &K,
) -> Result<f64> {
    check_inputs(x, data, w, k)?;
    let s: f64 = full_terms(data, w)
        .map(|(p, a)| a * k.profile(k.scaled_dist2(x, p)))
        .sum();
    Ok(k.density_norm() * s)
}

/// One mean-shift step from `x`.
pub fn mean_shift_step<K: KernelProfile + ?Sized>(
    x: &[f64],
    data: &Points,
    w: &WeightVector,
    k: &K,
) -> Result<Vec<f64>> {
    check_inputs(x, data, w, k)?;
    let mut numer = vec![0.0; data.dim()];
    let (_, denom) = accumulate(x, full_terms(data, w), k, &mut numer);
    finish_mean(numer, denom)
}

/// One medoid-shift step from `x`. Returns the index of the selected datum.
pub fn medoid_shift_step<K: KernelProfile + ?Sized>(
    x: &[f64],
    data: &Points,
    w: &WeightVector,
    k: &K,
) -> Result<usize> {
    check_inputs(x, data, w, k)?;
    let mut numer = vec![0.0; data.dim()];
    let (_, denom) = accumulate(x, full_terms(data, w), k, &mut numer);
    let m = finish_mean(numer, denom)?;
    Ok(nearest(data, &m, k))
}

fn finish_mean(mut numer: Vec<f64>, denom: f64) -> Result<Vec<f64>> {
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::VanishingDenominator);
    }
    numer.iter_mut().for_each(|v| *v /= denom);
    Ok(numer)
}

/// The weighted point set a trajectory climbs: all data with weights `w`,
/// or a sparse basis.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Support<'a> {
    Full(&'a WeightVector),
    Sparse(&'a SparseBasis),
}

impl<'a> Support<'a> {
    fn accumulate<K: KernelProfile + ?Sized>(
        self,
        x: &[f64],
        data: &Points,
        k: &K,
        numer: &mut [f64],
    ) -> (f64, f64) {
        match self {
            Support::Full(w) => accumulate(x, full_terms(data, w), k, numer),
            Support::Sparse(b) => accumulate(
                x,
                b.indices
                    .iter()
                    .map(|&i| data.point(i))
                    .zip(b.alphas.iter().copied()),
                k,
                numer,
            ),
        }
    }
}

/// Trajectory controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSeekConfig {
    pub variant: Variant,
    pub robust: RobustConfig,
    /// Subset size rule for sparse variants.
    pub sparse: SubsetStop,
    /// Step-size tolerance; `None` means `1e-6 · min(h)`.
    pub tol: Option<f64>,
    pub max_iters: usize,
    /// Keep per-trajectory density values and medoid paths.
    pub record: bool,
}

impl Default for ModeSeekConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ms,
            robust: RobustConfig::default(),
            sparse: SubsetStop::default(),
            tol: None,
            max_iters: 200,
            record: false,
        }
    }
}

impl ModeSeekConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    fn tolerance<K: KernelProfile + ?Sized>(&self, k: &K) -> Result<f64> {
        let tol = match self.tol {
            Some(t) => t,
            None => 1e-6 * k.bandwidths().iter().copied().fold(f64::INFINITY, f64::min),
        };
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive"));
        }
        Ok(tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSeekResult {
    pub variant: Variant,
    /// Mode reached from each datum.
    pub modes: Points,
    /// For medoid variants, the data index of each mode.
    pub mode_indices: Option<Vec<usize>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Density at every trajectory point, when recorded. Sparse variants
    /// record the sparse density they climb.
    pub densities: Option<Vec<Vec<f64>>>,
    /// Visited data indices of each medoid trajectory, when recorded.
    pub paths: Option<Vec<Vec<usize>>>,
    /// Medoid trajectories cut short by a revisited point.
    pub cycles: usize,
    /// Robust weights, when used.
    pub weights: Option<WeightVector>,
    pub irwls_converged: Option<bool>,
    pub basis: Option<SparseBasis>,
}

/// Runs `cfg.variant` from every datum.
pub fn run<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    cfg: &ModeSeekConfig,
) -> Result<ModeSeekResult> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    if cfg.variant.is_robust() {
        let outcome = irwls_weights(data, k, &cfg.robust)?;
        let mut res = run_weighted(data, k, &outcome.weights, cfg)?;
        res.irwls_converged = Some(outcome.converged);
        res.weights = Some(outcome.weights);
        Ok(res)
    } else {
        run_weighted(data, k, &WeightVector::uniform(data.len()), cfg)
    }
}

/// Runs the variant's shift with caller-supplied weights; the robust flag
/// of the variant is ignored.
pub fn run_weighted<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    w: &WeightVector,
    cfg: &ModeSeekConfig,
) -> Result<ModeSeekResult> {
    if data.is_empty() {
        return Err(Error::Empty("data"));
    }
    check_inputs(data.point(0), data, w, k)?;
    let tol = cfg.tolerance(k)?;
    let basis = if cfg.variant.is_sparse() {
        Some(sparse::select_subset(data, w, k, cfg.sparse)?)
    } else {
        None
    };
    let support = match &basis {
        Some(b) => Support::Sparse(b),
        None => Support::Full(w),
    };
    let mut res = if cfg.variant.is_medoid() {
        medoid_trajectories(data, k, support, cfg.max_iters, cfg.record)
    } else {
        mean_trajectories(data, k, support, tol, cfg.max_iters, cfg.record)
    };
    res.variant = cfg.variant;
    res.basis = basis;
    Ok(res)
}

fn empty_result(dim: usize) -> ModeSeekResult {
    ModeSeekResult {
        variant: Variant::Ms,
        modes: Points {
            dim,
            data: Vec::new(),
        },
        mode_indices: None,
        iterations: Vec::new(),
        converged: Vec::new(),
        densities: None,
        paths: None,
        cycles: 0,
        weights: None,
        irwls_converged: None,
        basis: None,
    }
}

fn mean_trajectories<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    support: Support<'_>,
    tol: f64,
    max_iters: usize,
    record: bool,
) -> ModeSeekResult {
    let dim = data.dim();
    let norm = k.density_norm();
    let tol2 = tol * tol;
    let mut res = empty_result(dim);
    let mut densities = Vec::new();
    let mut numer = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for start in data.iter() {
        x.copy_from_slice(start);
        let mut trace = Vec::new();
        let mut iters = 0;
        let mut converged = false;
        while iters < max_iters {
            let (dens, denom) = support.accumulate(&x, data, k, &mut numer);
            if record {
                trace.push(norm * dens);
            }
            if !(denom > 0.0) || !denom.is_finite() {
                break;
            }
            let mut step2 = 0.0;
            for (xi, n) in x.iter_mut().zip(&numer) {
                let next = n / denom;
                step2 += (next - *xi) * (next - *xi);
                *xi = next;
            }
            iters += 1;
            if step2 < tol2 {
                converged = true;
                break;
            }
        }
        if record && (converged || iters == max_iters) {
            let (dens, _) = support.accumulate(&x, data, k, &mut numer);
            trace.push(norm * dens);
        }
        res.modes.data.extend_from_slice(&x);
        res.iterations.push(iters);
        res.converged.push(converged);
        if record {
            densities.push(trace);
        }
    }
    if record {
        res.densities = Some(densities);
    }
    res
}

const UNKNOWN: usize = usize::MAX;

fn medoid_trajectories<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    support: Support<'_>,
    max_iters: usize,
    record: bool,
) -> ModeSeekResult {
    let len = data.len();
    let dim = data.dim();
    let norm = k.density_norm();
    // Each datum's successor is computed once; `usize::MAX` marks "not yet".
    // A datum whose kernel weights vanish is its own successor.
    let mut succ = vec![UNKNOWN; len];
    let mut dens = vec![0.0; len];
    let mut numer = vec![0.0; dim];
    let mut successor = |i: usize, succ: &mut [usize], dens: &mut [f64]| -> usize {
        if succ[i] == UNKNOWN {
            let (d, denom) = support.accumulate(data.point(i), data, k, &mut numer);
            dens[i] = norm * d;
            succ[i] = if denom > 0.0 && denom.is_finite() {
                numer.iter_mut().for_each(|v| *v /= denom);
                nearest(data, &numer, k)
            } else {
                i
            };
        }
        succ[i]
    };

    let mut res = empty_result(dim);
    let mut indices = Vec::with_capacity(len);
    let mut densities = Vec::new();
    let mut paths = Vec::new();
    let mut path = Vec::new();
    for start in 0..len {
        path.clear();
        path.push(start);
        let mut cur = start;
        let mut iters = 0;
        let mut converged = false;
        while iters < max_iters {
            let next = successor(cur, &mut succ, &mut dens);
            if next == cur {
                converged = true;
                break;
            }
            if path.contains(&next) {
                res.cycles += 1;
                break;
            }
            path.push(next);
            cur = next;
            iters += 1;
        }
        if record && !converged {
            successor(cur, &mut succ, &mut dens);
        }
        indices.push(cur);
        res.modes.data.extend_from_slice(data.point(cur));
        res.iterations.push(iters);
        res.converged.push(converged);
        if record {
            densities.push(path.iter().map(|&i| dens[i]).collect());
            paths.push(path.clone());
        }
    }
    res.mode_indices = Some(indices);
    if record {
        res.densities = Some(densities);
        res.paths = Some(paths);
    }
    res
}

/// Mode seeking followed by pruning.
pub fn segment<K: KernelProfile + ?Sized>(
    data: &Points,
    k: &K,
    cfg: &ModeSeekConfig,
) -> Result<(ModeSeekResult, ClusterSet)> {
    let res = run(data, k, cfg)?;
    let rep = if cfg.variant.is_medoid() {
        Representative::Medoid
    } else {
        Representative::Mean
    };
    let clusters = prune_modes(&res.modes, k, rep)?;
    Ok((res, clusters))
}
