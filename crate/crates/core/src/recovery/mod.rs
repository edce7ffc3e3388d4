//! Two-step recovery from one-bit measurements.
//!
//! Step I picks the GMRA center at scale `j` whose sign pattern is closest
//! to `y` in Hamming distance. Step II minimizes `sum_l (-y_l) <a_l, z>` (or
//! its positive part) over a convex set built from that center's affine
//! piece: the cap-hull `conv(P_S(P ∩ B(0, 2)))` for OMS, or the disk
//! `P ∩ B(0, R)` for OMS-simple.

mod cap;
mod solvers;

pub use cap::{FeasibleCap, MEMBERSHIP_TOL, ORIGIN_TOL};
pub use solvers::{
    plus_objective, solve_linear_on_affine_disk, solve_linear_on_disk, solve_plus_on_cap, PlusOptions, PlusSolution,
};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gmra::{Gmra, GmraLevel};
use crate::measure::{sign, BitVector, Ensemble};

/// Default radius for OMS-simple.
pub const DEFAULT_RADIUS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Exhaustive,
    /// Beam search down the cover-tree levels, keeping `k` nodes per level.
    Beam(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Linear objective over the cap-hull.
    Oms,
    /// Positive-part objective over the cap-hull.
    OmsPlus,
    /// Linear objective over `P ∩ B(0, radius)`.
    OmsSimple { radius: f64 },
    /// Step I only: the selected center.
    CenterOnly,
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Oms => "oms".into(),
            Variant::OmsPlus => "oms_plus".into(),
            Variant::OmsSimple { radius } => format!("oms_simple(R={radius})"),
            Variant::CenterOnly => "center_only".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub search: SearchMode,
    pub variant: Variant,
    pub origin_tol: f64,
    pub plus: PlusOptions,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            search: SearchMode::Exhaustive,
            variant: Variant::Oms,
            origin_tol: ORIGIN_TOL,
            plus: PlusOptions::default(),
        }
    }
}

impl RecoveryOptions {
    pub fn new(variant: Variant, search: SearchMode) -> Self {
        Self {
            variant,
            search,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub x_star: Vec<f64>,
    pub center_index: usize,
    /// `d_H(sign(A c_{j,k'}), y)`.
    pub center_hamming: usize,
    pub used_step_two: bool,
    /// `d_H(sign(A x*), y)`.
    pub residual_hamming: usize,
    pub variant: Variant,
    pub iterations: usize,
}

/// Sign patterns `sign(A c_{j,k})` of GMRA centers for one ensemble.
///
/// Exhaustive search needs only the target level; beam search needs every
/// level from the coarsest stored one down to the target.
#[derive(Debug, Clone)]
pub struct CenterSigns {
    rows: usize,
    j_min: i32,
    levels: Vec<Option<Vec<BitVector>>>,
}

impl CenterSigns {
    pub fn build(gmra: &Gmra, ensemble: &Ensemble, j: i32, search: SearchMode) -> Result<Self> {
        check_dim(gmra.ambient_dim(), ensemble.dim())?;
        let target = gmra.level_index(j)?;
        let first = match search {
            SearchMode::Exhaustive => target,
            SearchMode::Beam(_) => 0,
        };
        let mut levels = vec![None; gmra.levels().len()];
        for (idx, slot) in levels.iter_mut().enumerate().take(target + 1).skip(first) {
            *slot = Some(level_patterns(&gmra.levels()[idx], ensemble)?);
        }
        Ok(Self {
            rows: ensemble.rows(),
            j_min: gmra.j_min(),
            levels,
        })
    }

    pub fn level(&self, j: i32) -> Result<&[BitVector]> {
        let idx = usize::try_from(j - self.j_min).map_err(|_| Error::Domain(format!("scale {j} not cached")))?;
        self.levels
            .get(idx)
            .and_then(Option::as_deref)
            .ok_or_else(|| Error::Domain(format!("scale {j} not cached")))
    }
}

fn level_patterns(level: &GmraLevel, ensemble: &Ensemble) -> Result<Vec<BitVector>> {
    check_dim(level.ambient_dim(), ensemble.dim())?;
    let dim = ensemble.dim();
    let a = DMatrix::from_row_slice(ensemble.rows(), dim, ensemble.entries());
    // blocks of centers keep the K x m product small
    let out = (0..level.len())
        .collect::<Vec<_>>()
        .par_chunks(64)
        .flat_map_iter(|ks| {
            let c = DMatrix::from_fn(ks.len(), dim, |r, col| level.center(ks[r])[col]);
            let prod = c * a.transpose();
            (0..ks.len())
                .map(|r| BitVector::from_fn(prod.ncols(), |l| sign(prod[(r, l)])))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(out)
}

/// Step I: the center at scale `j` minimizing `d_H(sign(A c), y)`.
///
/// Exhaustive mode returns the exact argmin with the lowest index on ties.
pub fn select_center(
    gmra: &Gmra,
    signs: &CenterSigns,
    j: i32,
    y: &BitVector,
    mode: SearchMode,
) -> Result<(usize, usize)> {
    if y.len() != signs.rows {
        return Err(Error::Dimension {
            expected: signs.rows,
            found: y.len(),
        });
    }
    let target = gmra.level_index(j)?;
    match mode {
        SearchMode::Exhaustive => {
            let pats = signs.level(j)?;
            let mut best = (0, usize::MAX);
            for (k, p) in pats.iter().enumerate() {
                let h = p.hamming(y)?;
                if h < best.1 {
                    best = (k, h);
                    if h == 0 {
                        break;
                    }
                }
            }
            Ok(best)
        }
        SearchMode::Beam(k_beam) => {
            let pats: Vec<&[BitVector]> = (gmra.j_min()..=j).map(|s| signs.level(s)).collect::<Result<_>>()?;
            let (k, h) = gmra.links().beam_descend(0, target, k_beam, |lvl, node| {
                pats[lvl][node].hamming(y).map_or(f64::INFINITY, |h| h as f64)
            });
            Ok((k, h as usize))
        }
    }
}

/// Runs both steps with precomputed center signs.
pub fn recover(
    gmra: &Gmra,
    j: i32,
    ensemble: &Ensemble,
    signs: &CenterSigns,
    y: &BitVector,
    options: &RecoveryOptions,
) -> Result<RecoveryResult> {
    let (k, h) = select_center(gmra, signs, j, y, options.search)?;
    let level = gmra.level(j)?;
    let center = level.center(k).to_vec();
    let finish = |x_star: Vec<f64>, used: bool, iterations: usize| -> Result<RecoveryResult> {
        let residual_hamming = if used { ensemble.quantize(&x_star)?.hamming(y)? } else { h };
        Ok(RecoveryResult {
            x_star,
            center_index: k,
            center_hamming: h,
            used_step_two: used,
            residual_hamming,
            variant: options.variant,
            iterations,
        })
    };
    if h == 0 || options.variant == Variant::CenterOnly {
        return finish(center, false, 0);
    }
    match options.variant {
        Variant::Oms => {
            let cap = FeasibleCap::from_level(level, k, options.origin_tol)?;
            let w = ensemble.objective_vector(y)?;
            finish(cap.minimize_linear(&w)?, true, 0)
        }
        Variant::OmsPlus => {
            let cap = FeasibleCap::from_level(level, k, options.origin_tol)?;
            let sol = solve_plus_on_cap(&cap, ensemble, y, &options.plus)?;
            finish(sol.z, true, sol.iterations)
        }
        Variant::OmsSimple { radius } => {
            let w = ensemble.objective_vector(y)?;
            finish(solve_linear_on_disk(level, k, &w, radius)?, true, 0)
        }
        Variant::CenterOnly => unreachable!(),
    }
}

/// OMS with the linear or positive-part objective, per `options.variant`.
pub fn oms(gmra: &Gmra, j: i32, ensemble: &Ensemble, y: &BitVector, options: &RecoveryOptions) -> Result<RecoveryResult> {
    let signs = CenterSigns::build(gmra, ensemble, j, options.search)?;
    recover(gmra, j, ensemble, &signs, y, options)
}

/// OMS-simple: step II over `P_{j,k'} ∩ B(0, radius)`. A radius smaller
/// than `dist(0, P_{j,k'})` yields [`Error::Infeasible`].
pub fn oms_simple(
    gmra: &Gmra,
    j: i32,
    ensemble: &Ensemble,
    y: &BitVector,
    radius: f64,
    search: SearchMode,
) -> Result<RecoveryResult> {
    let options = RecoveryOptions::new(Variant::OmsSimple { radius }, search);
    oms(gmra, j, ensemble, y, &options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covertree::UNLIMITED_BEAM;
    use crate::gmra::{build_gmra, GmraParams};
    use crate::harness::datasets::sample_sphere;

    fn fixture() -> Gmra {
        let pts = sample_sphere(2, 10, 600, 21).unwrap();
        build_gmra(&pts, GmraParams::new(2).with_range(0, 4)).unwrap()
    }

    #[test]
    fn exact_center_pattern_exits_early() {
        let g = fixture();
        let ens = Ensemble::gaussian(300, 10, 1).unwrap();
        let c3 = g.level(3).unwrap().center(3).to_vec();
        let y = ens.quantize(&c3).unwrap();
        let signs = CenterSigns::build(&g, &ens, 3, SearchMode::Exhaustive).unwrap();
        assert_eq!(select_center(&g, &signs, 3, &y, SearchMode::Exhaustive).unwrap(), (3, 0));
        let r = oms(&g, 3, &ens, &y, &RecoveryOptions::default()).unwrap();
        assert!(!r.used_step_two);
        assert_eq!(r.x_star, c3);
        assert_eq!(r.residual_hamming, 0);
    }

    #[test]
    fn single_center_level() {
        let g = fixture();
        let ens = Ensemble::gaussian(50, 10, 2).unwrap();
        let y = ens.quantize(&[1.0; 10]).unwrap();
        let signs = CenterSigns::build(&g, &ens, 0, SearchMode::Exhaustive).unwrap();
        assert_eq!(select_center(&g, &signs, 0, &y, SearchMode::Exhaustive).unwrap().0, 0);
    }

    #[test]
    fn exhaustive_matches_double_loop() {
        let g = fixture();
        let j = (g.j_min()..=g.j_max()).find(|&j| g.level(j).unwrap().len() >= 50).unwrap();
        let level = g.level(j).unwrap();
        let ens = Ensemble::gaussian(64, 10, 3).unwrap();
        let signs = CenterSigns::build(&g, &ens, j, SearchMode::Exhaustive).unwrap();
        let mut rng = crate::rng::rng_from_seed(4);
        for _ in 0..20 {
            let y = BitVector::from_fn(64, |_| if rand::Rng::random::<bool>(&mut rng) { 1 } else { -1 });
            let mut best = (0, usize::MAX);
            for k in 0..level.len() {
                let a = ens.measure(level.center(k)).unwrap();
                let h = (0..64).filter(|&l| sign(a[l]) != y.get(l)).count();
                if h < best.1 {
                    best = (k, h);
                }
            }
            assert_eq!(select_center(&g, &signs, j, &y, SearchMode::Exhaustive).unwrap(), best);
        }
    }

    #[test]
    fn unlimited_beam_is_exhaustive() {
        let g = fixture();
        let ens = Ensemble::gaussian(100, 10, 5).unwrap();
        let pts = sample_sphere(2, 10, 40, 6).unwrap();
        let ex = CenterSigns::build(&g, &ens, 4, SearchMode::Exhaustive).unwrap();
        let bm = CenterSigns::build(&g, &ens, 4, SearchMode::Beam(UNLIMITED_BEAM)).unwrap();
        for x in pts.points() {
            let y = ens.quantize(x).unwrap();
            let a = recover(&g, 4, &ens, &ex, &y, &RecoveryOptions::default()).unwrap();
            let b = recover(&g, 4, &ens, &bm, &y, &RecoveryOptions::new(Variant::Oms, SearchMode::Beam(UNLIMITED_BEAM)))
                .unwrap();
            assert_eq!(a.x_star, b.x_star);
            assert_eq!(a.center_index, b.center_index);
        }
        // exhaustive caches lack the coarse levels beam search needs
        let y = ens.quantize(pts.point(0)).unwrap();
        assert!(select_center(&g, &ex, 4, &y, SearchMode::Beam(3)).is_err());
    }

    #[test]
    fn positive_row_scaling_keeps_argmins() {
        let g = fixture();
        let ens = Ensemble::gaussian(120, 10, 7).unwrap();
        let factors: Vec<f64> = (0..120).map(|l| 0.1 + (l % 7) as f64).collect();
        let scaled_entries: Vec<f64> = ens
            .entries()
            .chunks_exact(10)
            .zip(&factors)
            .flat_map(|(row, f)| row.iter().map(move |v| v * f))
            .collect();
        let scaled = Ensemble::from_entries(120, 10, 7, scaled_entries).unwrap();
        let pts = sample_sphere(2, 10, 20, 8).unwrap();
        let s1 = CenterSigns::build(&g, &ens, 3, SearchMode::Exhaustive).unwrap();
        let s2 = CenterSigns::build(&g, &scaled, 3, SearchMode::Exhaustive).unwrap();
        let uniform = ens.scaled(3.5);
        let s3 = CenterSigns::build(&g, &uniform, 3, SearchMode::Exhaustive).unwrap();
        for x in pts.points() {
            let y = ens.quantize(x).unwrap();
            assert_eq!(scaled.quantize(x).unwrap(), y);
            let k1 = select_center(&g, &s1, 3, &y, SearchMode::Exhaustive).unwrap();
            assert_eq!(k1, select_center(&g, &s2, 3, &y, SearchMode::Exhaustive).unwrap());
            let a = recover(&g, 3, &ens, &s1, &y, &RecoveryOptions::default()).unwrap();
            let b = recover(&g, 3, &uniform, &s3, &y, &RecoveryOptions::default()).unwrap();
            for (p, q) in a.x_star.iter().zip(&b.x_star) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outputs_satisfy_their_constraints() {
        let g = fixture();
        let ens = Ensemble::gaussian(200, 10, 9).unwrap();
        let pts = sample_sphere(2, 10, 30, 10).unwrap();
        let signs = CenterSigns::build(&g, &ens, 3, SearchMode::Exhaustive).unwrap();
        let level = g.level(3).unwrap();
        for x in pts.points() {
            let y = ens.quantize(x).unwrap();
            for variant in [Variant::Oms, Variant::OmsPlus] {
                let r = recover(&g, 3, &ens, &signs, &y, &RecoveryOptions::new(variant, SearchMode::Exhaustive)).unwrap();
                let cap = FeasibleCap::from_level(level, r.center_index, ORIGIN_TOL).unwrap();
                assert!(!r.used_step_two || cap.contains(&r.x_star, MEMBERSHIP_TOL));
                assert_eq!(r.residual_hamming, ens.quantize(&r.x_star).unwrap().hamming(&y).unwrap());
            }
            let r = recover(&g, 3, &ens, &signs, &y, &RecoveryOptions::new(Variant::OmsSimple { radius: 1.5 }, SearchMode::Exhaustive))
                .unwrap();
            assert!(crate::linalg::norm(&r.x_star) <= 1.5 + 1e-8);
            let p = level.project(r.center_index, &r.x_star).unwrap();
            assert!(crate::linalg::dist(&p, &r.x_star) < 1e-8);
        }
    }

    #[test]
    fn small_radius_reports_infeasible() {
        let g = fixture();
        let ens = Ensemble::gaussian(100, 10, 11).unwrap();
        let pts = sample_sphere(2, 10, 20, 12).unwrap();
        let mut infeasible = 0;
        for x in pts.points() {
            let y = ens.quantize(x).unwrap();
            if let Err(Error::Infeasible { c_norm, radius }) = oms_simple(&g, 3, &ens, &y, 0.5, SearchMode::Exhaustive) {
                assert!(c_norm > radius);
                infeasible += 1;
            }
        }
        assert!(infeasible > 10);
    }

    #[test]
    fn config_spelling() {
        let v: Vec<Variant> = serde_json::from_str(r#"["oms", "oms_plus", "center_only", {"oms_simple": {"radius": 1.5}}]"#).unwrap();
        assert_eq!(v[3], Variant::OmsSimple { radius: 1.5 });
        let s: Vec<SearchMode> = serde_json::from_str(r#"["exhaustive", {"beam": 10}]"#).unwrap();
        assert_eq!(s, vec![SearchMode::Exhaustive, SearchMode::Beam(10)]);
    }
}
