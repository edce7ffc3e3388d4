//! Monte-Carlo Gaussian widths `w(K) = E sup_{x ∈ K} <g, x>`.
//!
//! Continuous sets are replaced by finitely many sampled points, so every
//! estimate here is biased low: the per-trial maximum over samples can only
//! undershoot the supremum.
//!
//! Each trial `t` draws `g` and the sample points from two separate streams
//! derived from `(seed, t)`. A sampler that sees more points for the same
//! `(g, point seed)` therefore never reports a smaller maximum, which makes
//! the lower union inequality exact at the estimator level.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{check_dim, Error, Result};
use crate::gmra::GmraLevel;
use crate::linalg::{dist, dot, norm};
use crate::rng::{derive_seed, rng_from_seed, tags, Rng};

/// A set `K ⊂ R^D` that can report `max <g, x>` over points of `K`.
pub trait SetSampler: Sync {
    fn dim(&self) -> usize;

    /// Maximum of `<g, x>` over up to `count` points of the set drawn with
    /// `rng`; `None` if the set is empty.
    fn trial_max(&self, g: &[f64], rng: &mut Rng, count: usize) -> Option<f64>;
}

/// A finite set, always scanned in full.
#[derive(Debug, Clone)]
pub struct FiniteSet(pub PointCloud);

impl SetSampler for FiniteSet {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn trial_max(&self, g: &[f64], _: &mut Rng, _: usize) -> Option<f64> {
        self.0.points().map(|x| dot(g, x)).reduce(f64::max)
    }
}

/// Unit ball of the row span of an orthonormal `k x D` basis.
///
/// A linear functional peaks on the boundary sphere, so points are drawn
/// uniformly from that sphere.
#[derive(Debug, Clone)]
pub struct SubspaceBall {
    dim: usize,
    basis: Vec<f64>,
}

impl SubspaceBall {
    pub fn new(basis: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || basis.is_empty() || basis.len() % dim != 0 {
            return Err(Error::DegenerateInput("basis must be a nonempty k x D matrix"));
        }
        Ok(Self { dim, basis })
    }

    /// Span of the first `k` coordinate axes of `R^D`.
    pub fn coordinate(k: usize, dim: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::Domain(format!("need 1 <= k <= D, got k={k}, D={dim}")));
        }
        let mut basis = vec![0.0; k * dim];
        for i in 0..k {
            basis[i * dim + i] = 1.0;
        }
        Self::new(basis, dim)
    }

    pub fn rank(&self) -> usize {
        self.basis.len() / self.dim
    }
}

impl SetSampler for SubspaceBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn trial_max(&self, g: &[f64], rng: &mut Rng, count: usize) -> Option<f64> {
        let k = self.rank();
        let proj: Vec<f64> = self.basis.chunks_exact(self.dim).map(|r| dot(r, g)).collect();
        let mut best = None::<f64>;
        let mut u = vec![0.0; k];
        for _ in 0..count {
            u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let n = norm(&u);
            if n == 0.0 {
                continue;
            }
            let val = dot(&proj, &u) / n;
            best = Some(best.map_or(val, |b| b.max(val)));
        }
        best
    }
}

/// `K_1 ∪ K_2`. Both parts see the same point stream, so the union's trial
/// maximum is exactly the larger of the parts' maxima.
pub struct Union<'a>(pub &'a dyn SetSampler, pub &'a dyn SetSampler);

impl SetSampler for Union<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn trial_max(&self, g: &[f64], rng: &mut Rng, count: usize) -> Option<f64> {
        let mut second = rng.clone();
        let a = self.0.trial_max(g, rng, count);
        let b = self.1.trial_max(g, &mut second, count);
        match (a, b) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

/// The GMRA image of `points` at one scale: `P_{j,k_j(x)}(x)` for each `x`.
pub fn gmra_image(level: &GmraLevel, points: &PointCloud) -> Result<PointCloud> {
    check_dim(level.ambient_dim(), points.dim())?;
    let mut data = Vec::with_capacity(points.as_slice().len());
    for x in points.points() {
        let k = level.nearest_center(x)?;
        data.extend(level.project(k, x)?);
    }
    PointCloud::new(points.dim(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
}

impl WidthEstimate {
    /// `mean >= -3 std_err`.
    pub fn is_plausible(&self) -> bool {
        self.mean >= -3.0 * self.std_err
    }
}

/// Mean over `trials` of the sampled `max <g, x>`, with its standard error.
pub fn estimate_width(sampler: &dyn SetSampler, trials: usize, points_per_trial: usize, seed: u64) -> Result<WidthEstimate> {
    if trials < 2 {
        return Err(Error::Domain(format!("need at least 2 trials, got {trials}")));
    }
    let dim = sampler.dim();
    let g_base = derive_seed(seed, tags::WIDTH_GAUSS);
    let p_base = derive_seed(seed, tags::WIDTH_POINTS);
    let maxima = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut g_rng = rng_from_seed(derive_seed(g_base, t as u64));
            let g: Vec<f64> = (0..dim).map(|_| g_rng.sample(StandardNormal)).collect();
            let mut p_rng = rng_from_seed(derive_seed(p_base, t as u64));
            sampler.trial_max(&g, &mut p_rng, points_per_trial)
        })
        .collect::<Option<Vec<f64>>>()
        .ok_or(Error::EmptyInput("sampler produced no points"))?;
    let n = trials as f64;
    let mean = maxima.iter().sum::<f64>() / n;
    let var = maxima.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(WidthEstimate {
        mean,
        std_err: (var / n).sqrt(),
        trials,
        seed,
    })
}

/// Flags for `max{w(M), w(M_j)} <= w(M ∪ M_j) <= 2 w(M) + 2 w(M_j) + 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnionWidthReport {
    /// Without slack. Holds exactly when `union` came from [`Union`] of the
    /// two samplers at the same seed and sampling density.
    pub lower_exact: bool,
    /// With 3 standard errors of slack.
    pub lower: bool,
    pub upper: bool,
}

pub fn check_union_width(w_m: &WidthEstimate, w_mj: &WidthEstimate, union: &WidthEstimate) -> UnionWidthReport {
    let lo = w_m.mean.max(w_mj.mean);
    let slack = 3.0 * (union.std_err + w_m.std_err.max(w_mj.std_err));
    let upper_slack = 3.0 * (union.std_err + 2.0 * w_m.std_err + 2.0 * w_mj.std_err);
    UnionWidthReport {
        lower_exact: lo <= union.mean,
        lower: lo <= union.mean + slack,
        upper: union.mean <= 2.0 * w_m.mean + 2.0 * w_mj.mean + 3.0 + upper_slack,
    }
}

/// Declared geometry of a manifold. Reach and volume are not estimated.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
pub struct ManifoldMeta {
    pub d: usize,
    pub diam: f64,
    pub reach: f64,
    pub volume: f64,
}

impl ManifoldMeta {
    /// Unit `d`-sphere: diameter 2, reach 1, surface area of `S^d`.
    pub fn unit_sphere(d: usize) -> Self {
        let k = (d + 1) as f64;
        let volume = 2.0 * std::f64::consts::PI.powf(k / 2.0) / gamma(k / 2.0);
        Self {
            d,
            diam: 2.0,
            reach: 1.0,
            volume,
        }
    }
}

/// `Γ(x)` for `x` a positive multiple of 1/2.
fn gamma(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if (x - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (x - 1.0) * gamma(x - 1.0)
    }
}

/// `C diam sqrt(d max{log(c sqrt(d) / min{1, reach}), 1} + log max{1, Vol})`.
///
/// `C` and `c` are unspecified absolute constants; `C = c = 1` is only a
/// placeholder, so the value is a shape, not a certified bound.
pub fn riemann_width_bound(meta: &ManifoldMeta, big_c: f64, small_c: f64) -> Result<f64> {
    let positive = [meta.diam, meta.reach, meta.volume, big_c, small_c];
    if meta.d == 0 || positive.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("manifold metadata and constants must be positive".into()));
    }
    let d = meta.d as f64;
    let inner = (small_c * d.sqrt() / meta.reach.min(1.0)).ln().max(1.0);
    Ok(big_c * meta.diam * (d * inner + meta.volume.max(1.0).ln()).sqrt())
}

/// Screening constant for the finite-set bound.
pub const SCREEN_CF: f64 = 3.0;

/// `estimate <= C_f diam(K ∪ {0}) sqrt(log |K|) (1 + 3 std_err / mean)`.
/// Advisory only; `None` when `|K| < 2` makes the bound degenerate.
pub fn finite_set_screen(set: &PointCloud, estimate: &WidthEstimate) -> Option<bool> {
    if set.len() < 2 {
        return None;
    }
    let mut diam = set.points().map(norm).fold(0.0, f64::max);
    for a in 0..set.len() {
        for b in a + 1..set.len() {
            diam = diam.max(dist(set.point(a), set.point(b)));
        }
    }
    let rel = if estimate.mean > 0.0 { 3.0 * estimate.std_err / estimate.mean } else { 0.0 };
    Some(estimate.mean <= SCREEN_CF * diam * (set.len() as f64).ln().sqrt() * (1.0 + rel))
}

/// Checks `w(K_0) <= w(K_1) <= ...` without slack, for nested sets sampled
/// at a common seed.
pub fn check_chain(estimates: &[WidthEstimate]) -> bool {
    estimates.windows(2).all(|p| p[0].mean <= p[1].mean)
}
