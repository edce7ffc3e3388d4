//! Empirical geometric multi-resolution analysis.
//!
//! Level `j` of the GMRA uses the cover-tree landmarks `j` levels below the
//! root as Voronoi sites, so level 0 is the single root cell and the
//! landmarks of level `j` are `2^-(j + root_scale)` separated. Each Voronoi cell gets a center (the cell mean `ĉ_{j,k}`) and an
//! orthonormal basis `Φ_{j,k}` of its top-`d` principal subspace, defining
//! the affine projector `P_{j,k}(z) = Φᵀ Φ (z - ĉ) + ĉ`. Cells are numbered
//! by landmark order, so the cover-tree parent links carry over as the GMRA
//! parent maps.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cloud::{ByteReader, PointCloud};
use crate::covertree::{scale_radius, CoverTree, LevelLinks};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, complete_orthonormal, dist, dist_sq, dot};

const MAGIC: &[u8; 4] = b"OMSG";
const NO_PARENT: u32 = u32::MAX;

/// Default finest level.
pub const DEFAULT_J_MAX: i32 = 10;

/// Threshold below which two adjacent covariance eigenvalues count as tied.
pub const SPECTRAL_TIE_TOL: f64 = 1e-9;

/// Voronoi assignment `κ(x) = argmin_k |x - a_k|`, lowest index on ties.
pub fn assign_cells(landmarks: &PointCloud, points: &PointCloud) -> Result<Vec<u32>> {
    if landmarks.is_empty() {
        return Err(Error::EmptyInput("need at least one landmark"));
    }
    check_dim(landmarks.dim(), points.dim())?;
    Ok(points
        .as_slice()
        .par_chunks_exact(points.dim())
        .map(|x| nearest_row(landmarks.as_slice(), landmarks.dim(), x) as u32)
        .collect())
}

fn nearest_row(rows: &[f64], dim: usize, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in rows.chunks_exact(dim).enumerate() {
        let d = dist_sq(c, x);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Local PCA fit of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    pub center: Vec<f64>,
    /// `d x D`, orthonormal rows, row-major.
    pub basis: Vec<f64>,
    /// Mean squared distance of the cell points to `ĉ + span(Φ)`.
    pub residual: f64,
    /// Fewer than `d + 1` points, or fewer than `d` nonzero principal
    /// directions; the basis was completed with ambient axes.
    pub degenerate: bool,
    /// `λ_d` and `λ_{d+1}` coincide within [`SPECTRAL_TIE_TOL`].
    pub spectral_tie: bool,
}

/// Sample mean and top-`d` principal subspace of `points`.
pub fn fit_cell(points: &PointCloud, d: usize) -> Result<CellFit> {
    let n = points.len();
    let dim = points.dim();
    if n == 0 {
        return Err(Error::EmptyInput("cannot fit an empty cell"));
    }
    if d > dim {
        return Err(Error::Domain(format!("intrinsic dimension {d} exceeds ambient {dim}")));
    }
    let mut center = vec![0.0; dim];
    for p in points.points() {
        axpy(1.0 / n as f64, p, &mut center);
    }
    let centered = DMatrix::from_fn(n, dim, |i, c| points.point(i)[c] - center[c]);

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cutoff = 1e-12 * sigma.first().copied().unwrap_or(0.0).max(1e-300);

    let mut basis = Vec::with_capacity(d * dim);
    for &i in order.iter().take(d) {
        if svd.singular_values[i] <= cutoff {
            break;
        }
        let row = v_t.row(i);
        basis.extend(row.iter().copied());
    }
    let found = basis.len() / dim;
    if found < d {
        complete_orthonormal(&mut basis, dim, d);
    }
    let degenerate = n < d + 1 || found < d;

    let lambda = |k: usize| sigma.get(k).map_or(0.0, |s| s * s / n as f64);
    let spectral_tie = !degenerate && d > 0 && d < dim && (lambda(d - 1) - lambda(d)).abs() <= SPECTRAL_TIE_TOL;

    let residual = points
        .points()
        .map(|p| dist_sq(p, &affine_project(&center, &basis, dim, p)))
        .sum::<f64>()
        / n as f64;

    Ok(CellFit {
        center,
        basis,
        residual,
        degenerate,
        spectral_tie,
    })
}

fn affine_project(center: &[f64], basis: &[f64], dim: usize, z: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
    let mut out = center.to_vec();
    for row in basis.chunks_exact(dim) {
        axpy(dot(row, &diff), row, &mut out);
    }
    out
}

/// One scale of the GMRA.
#[derive(Debug, Clone, PartialEq)]
pub struct GmraLevel {
    scale: i32,
    d: usize,
    dim: usize,
    /// `K_j x D`
    centers: Vec<f64>,
    /// `K_j x d x D`
    bases: Vec<f64>,
    /// Parent cell at the previous stored level; `None` for the coarsest.
    parent: Option<Vec<u32>>,
    cell_counts: Vec<u32>,
    /// Build-time metadata, absent after reading from a file.
    cell_of: Vec<u32>,
    landmarks: Vec<usize>,
    degenerate: Vec<bool>,
    spectral_ties: usize,
}

impl GmraLevel {
    pub fn scale(&self) -> i32 {
        self.scale
    }

    /// Number of cells `K_j`.
    pub fn len(&self) -> usize {
        self.cell_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_counts.is_empty()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    /// `Φ_{j,k}` as `d` rows of length `D`.
    pub fn basis(&self, k: usize) -> &[f64] {
        let stride = self.d * self.dim;
        &self.bases[k * stride..(k + 1) * stride]
    }

    pub fn parent(&self) -> Option<&[u32]> {
        self.parent.as_deref()
    }

    pub fn cell_counts(&self) -> &[u32] {
        &self.cell_counts
    }

    /// Cell of each sample (empty for levels read from a file).
    pub fn cell_of(&self) -> &[u32] {
        &self.cell_of
    }

    /// Source indices of the cover-tree landmarks `a_{j,k}` (empty for
    /// levels read from a file).
    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    pub fn degenerate_cells(&self) -> usize {
        self.degenerate.iter().filter(|&&b| b).count()
    }

    pub fn spectral_ties(&self) -> usize {
        self.spectral_ties
    }

    /// `P_{j,k}(z)`.
    pub fn project(&self, k: usize, z: &[f64]) -> Result<Vec<f64>> {
        if k >= self.len() {
            return Err(Error::Index { index: k, len: self.len() });
        }
        check_dim(self.dim, z.len())?;
        Ok(affine_project(self.center(k), self.basis(k), self.dim, z))
    }

    /// `k_j(z) = argmin_k |z - ĉ_{j,k}|`, lowest index on ties.
    pub fn nearest_center(&self, z: &[f64]) -> Result<usize> {
        check_dim(self.dim, z.len())?;
        Ok(nearest_row(&self.centers, self.dim, z))
    }

    /// `|z - P_{j, k_j(z)}(z)|`.
    pub fn approximation_error(&self, z: &[f64]) -> Result<f64> {
        let k = self.nearest_center(z)?;
        Ok(dist(z, &self.project(k, z)?))
    }
}

/// Build options. `None` selects the defaults: the coarsest scale with at
/// least two landmarks, and [`DEFAULT_J_MAX`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmraParams {
    pub intrinsic_dim: usize,
    pub j_min: Option<i32>,
    pub j_max: Option<i32>,
}

impl GmraParams {
    pub fn new(intrinsic_dim: usize) -> Self {
        Self {
            intrinsic_dim,
            j_min: None,
            j_max: None,
        }
    }

    pub fn with_range(mut self, j_min: i32, j_max: i32) -> Self {
        self.j_min = Some(j_min);
        self.j_max = Some(j_max);
        self
    }
}

/// Non-fatal conditions found while building.
#[derive(Debug, Clone, PartialEq)]
pub enum GmraWarning {
    /// The sample has no distinct landmarks beyond `effective`; the
    /// requested finest scale was lowered.
    ScaleTruncated { requested: i32, effective: i32 },
    /// Cells with fewer than `d + 1` points (or rank-deficient) at a scale.
    DegenerateCells { scale: i32, count: usize },
    /// Cells whose `d`-th and `(d+1)`-th eigenvalues tie at a scale.
    SpectralTies { scale: i32, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gmra {
    d: usize,
    dim: usize,
    levels: Vec<GmraLevel>,
    links: LevelLinks,
    warnings: Vec<GmraWarning>,
}

/// Builds the GMRA of `points` on scales `j_min..=j_max`.
pub fn build_gmra(points: &PointCloud, params: GmraParams) -> Result<Gmra> {
    let tree = CoverTree::build(points)?;
    build_gmra_with_tree(points, &tree, params)
}

pub fn build_gmra_with_tree(points: &PointCloud, tree: &CoverTree, params: GmraParams) -> Result<Gmra> {
    let d = params.intrinsic_dim;
    let dim = points.dim();
    if d > dim {
        return Err(Error::Domain(format!("intrinsic dimension {d} exceeds ambient {dim}")));
    }
    if !points.is_normalized() {
        log::warn!("GMRA input is not normalized to the unit sphere");
    }
    // GMRA level j is depth below the cover-tree root: scale j + root_scale.
    let root = tree.root_scale();
    let depth = tree.max_scale() - root;
    let default_min = (0..=depth).find(|&j| tree.level_size(j + root) >= 2).unwrap_or(0);
    let j_min = params.j_min.unwrap_or(default_min);
    if j_min < 0 {
        return Err(Error::Domain(format!("j_min {j_min} is negative")));
    }
    let requested = params.j_max.unwrap_or(DEFAULT_J_MAX);
    if requested < j_min {
        return Err(Error::Domain(format!("j_max {requested} below j_min {j_min}")));
    }
    let j_min = j_min.min(depth);
    let mut warnings = Vec::new();
    let j_max = if requested > depth {
        log::warn!("requested j_max {requested} exceeds the sample resolution; using {depth}");
        warnings.push(GmraWarning::ScaleTruncated {
            requested,
            effective: depth,
        });
        depth
    } else {
        requested
    };

    let mut levels = Vec::new();
    for j in j_min..=j_max {
        let scale = j + root;
        let lm = tree.level_landmarks(scale).to_vec();
        let sites = points.select(&lm);
        let cell_of = assign_cells(&sites, points)?;
        let k_count = lm.len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k_count];
        for (i, &c) in cell_of.iter().enumerate() {
            members[c as usize].push(i);
        }
        let fits = members
            .par_iter()
            .map(|idx| fit_cell(&points.select(idx), d))
            .collect::<Result<Vec<_>>>()?;

        let parent = (j > j_min)
            .then(|| (0..k_count).map(|k| tree.parent(scale, k).expect("non-root level") as u32).collect());
        let mut centers = Vec::with_capacity(k_count * dim);
        let mut bases = Vec::with_capacity(k_count * d * dim);
        for f in &fits {
            centers.extend_from_slice(&f.center);
            bases.extend_from_slice(&f.basis);
        }
        let degenerate: Vec<bool> = fits.iter().map(|f| f.degenerate).collect();
        let spectral_ties = fits.iter().filter(|f| f.spectral_tie).count();
        let level = GmraLevel {
            scale: j,
            d,
            dim,
            centers,
            bases,
            parent,
            cell_counts: members.iter().map(|m| m.len() as u32).collect(),
            cell_of,
            landmarks: lm,
            degenerate,
            spectral_ties,
        };
        if level.degenerate_cells() > 0 {
            warnings.push(GmraWarning::DegenerateCells {
                scale: j,
                count: level.degenerate_cells(),
            });
        }
        if spectral_ties > 0 {
            warnings.push(GmraWarning::SpectralTies {
                scale: j,
                count: spectral_ties,
            });
        }
        levels.push(level);
    }
    Gmra::from_levels(d, dim, levels, warnings)
}

impl Gmra {
    fn from_levels(d: usize, dim: usize, levels: Vec<GmraLevel>, warnings: Vec<GmraWarning>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyInput("GMRA needs at least one level"));
        }
        for pair in levels.windows(2) {
            if pair[1].scale != pair[0].scale + 1 {
                return Err(Error::Domain("GMRA levels must be consecutive scales".into()));
            }
            if pair[1].len() < pair[0].len() {
                return Err(Error::Domain("cell counts must be nondecreasing in scale".into()));
            }
        }
        let widths = levels.iter().map(GmraLevel::len).collect();
        let parents: Vec<Vec<u32>> = levels[1..]
            .iter()
            .map(|l| l.parent.clone().ok_or(Error::Domain("missing parent map".into())))
            .collect::<Result<_>>()?;
        let links = LevelLinks::new(widths, &parents)?;
        Ok(Self {
            d,
            dim,
            levels,
            links,
            warnings,
        })
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[GmraLevel] {
        &self.levels
    }

    pub fn j_min(&self) -> i32 {
        self.levels[0].scale
    }

    pub fn j_max(&self) -> i32 {
        self.levels[self.levels.len() - 1].scale
    }

    /// Position of scale `j` in [`Gmra::levels`].
    pub fn level_index(&self, j: i32) -> Result<usize> {
        if j < self.j_min() || j > self.j_max() {
            return Err(Error::Domain(format!(
                "scale {j} outside stored range {}..={}",
                self.j_min(),
                self.j_max()
            )));
        }
        Ok((j - self.j_min()) as usize)
    }

    pub fn level(&self, j: i32) -> Result<&GmraLevel> {
        Ok(&self.levels[self.level_index(j)?])
    }

    pub fn links(&self) -> &LevelLinks {
        &self.links
    }

    pub fn warnings(&self) -> &[GmraWarning] {
        &self.warnings
    }

    /// Mean of `|x - P_{j, k_j(x)}(x)|` over `points`.
    pub fn mean_approximation_error(&self, j: i32, points: &PointCloud) -> Result<f64> {
        let level = self.level(j)?;
        check_dim(self.dim, points.dim())?;
        if points.is_empty() {
            return Err(Error::EmptyInput("no evaluation points"));
        }
        let errs = points
            .as_slice()
            .par_chunks_exact(self.dim)
            .map(|x| level.approximation_error(x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(errs.iter().sum::<f64>() / errs.len() as f64)
    }

    /// Writes the `OMSG` format: magic, `u32` d, `u32` D, `u32` level count,
    /// then per level `u32` j (two's complement), `u32` K_j, centers
    /// (`K_j * D` f64), bases (`K_j * d * D` f64), parent map (`K_j` u32,
    /// `u32::MAX` at the coarsest level) and cell counts (`K_j` u32). All
    /// little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.d as u32, self.dim as u32, self.levels.len() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for level in &self.levels {
            w.write_all(&(level.scale as u32).to_le_bytes())?;
            w.write_all(&(level.len() as u32).to_le_bytes())?;
            for v in level.centers.iter().chain(&level.bases) {
                w.write_all(&v.to_le_bytes())?;
            }
            match &level.parent {
                Some(p) => p.iter().try_for_each(|v| w.write_all(&v.to_le_bytes()))?,
                None => (0..level.len()).try_for_each(|_| w.write_all(&NO_PARENT.to_le_bytes()))?,
            }
            for v in &level.cell_counts {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = ByteReader::new(r);
        r.expect_magic(MAGIC)?;
        let d = r.u32_le()? as usize;
        let dim = r.u32_le()? as usize;
        let count = r.u32_le()? as usize;
        if dim == 0 || d > dim {
            return Err(Error::format(4, format!("invalid dimensions d={d}, D={dim}")));
        }
        let mut levels = Vec::with_capacity(count.min(64));
        for t in 0..count {
            let scale = r.u32_le()? as i32;
            let k = r.u32_le()? as usize;
            let centers = r.f64_vec(k * dim)?;
            let bases = r.f64_vec(k * d * dim)?;
            let offset = r.offset();
            let raw_parent = r.u32_vec(k)?;
            let parent = if t == 0 {
                None
            } else {
                if raw_parent.contains(&NO_PARENT) {
                    return Err(Error::format(offset, "missing parent below the coarsest level"));
                }
                Some(raw_parent)
            };
            let cell_counts = r.u32_vec(k)?;
            levels.push(GmraLevel {
                scale,
                d,
                dim,
                centers,
                bases,
                parent,
                cell_counts,
                cell_of: Vec::new(),
                landmarks: Vec::new(),
                degenerate: vec![false; k],
                spectral_ties: 0,
            });
        }
        Self::from_levels(d, dim, levels, Vec::new())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Per-level observations against the GMRA axioms.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAudit {
    pub scale: i32,
    pub cells: usize,
    /// Largest `C_1` with `|c_{k1} - c_{k2}| > C_1 2^-j` for all pairs
    /// (`inf` with a single center).
    pub separation_c1: f64,
    /// Smallest `C_2` satisfying the parent-proximity condition, if the level
    /// has a parent level.
    pub parent_c2: Option<f64>,
    /// `parent_c2 > 1`.
    pub parent_violation: bool,
    /// Largest distance from a center to its nearest sample.
    pub tube_distance: Option<f64>,
    /// Mean `|x - P_{j,k_j(x)}(x)|` over the samples.
    pub mean_error: Option<f64>,
    /// Largest `|x - P_{j,k'}(x)| * 2^j` over samples `x` and admissible
    /// `k'` (centers within `16 max(|x - c_{j,k_j(x)}|, C_1 2^{-j-1})`).
    pub admissible_ratio: Option<f64>,
    pub degenerate_cells: usize,
    pub spectral_ties: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmraAudit {
    pub levels: Vec<LevelAudit>,
    /// Least-squares fit `log2(mean_error) ≈ intercept - exponent * j`.
    pub decay_exponent: Option<f64>,
    pub decay_intercept: Option<f64>,
}

/// Observational report on the GMRA axioms; never fails on a violation.
pub fn audit_axioms(gmra: &Gmra, points: Option<&PointCloud>) -> Result<GmraAudit> {
    if let Some(p) = points {
        check_dim(gmra.dim, p.dim())?;
    }
    let mut out = Vec::with_capacity(gmra.levels.len());
    for (t, level) in gmra.levels.iter().enumerate() {
        let radius = scale_radius(level.scale);
        let k = level.len();
        let mut min_sep = f64::INFINITY;
        for a in 0..k {
            for b in a + 1..k {
                min_sep = min_sep.min(dist(level.center(a), level.center(b)));
            }
        }
        let c1 = min_sep / radius;

        let (parent_c2, parent_violation) = match (&level.parent, t.checked_sub(1)) {
            (Some(parent), Some(prev)) => {
                let prev = &gmra.levels[prev];
                let mut worst = 0.0f64;
                for (kk, &p) in parent.iter().enumerate() {
                    let c = level.center(kk);
                    let to_parent = dist(c, prev.center(p as usize));
                    let others = (0..prev.len())
                        .filter(|&q| q != p as usize)
                        .map(|q| dist(c, prev.center(q)))
                        .fold(f64::INFINITY, f64::min);
                    let ratio = if others.is_infinite() {
                        0.0
                    } else if others == 0.0 {
                        f64::INFINITY
                    } else {
                        to_parent / others
                    };
                    worst = worst.max(ratio);
                }
                (Some(worst), worst > 1.0)
            }
            _ => (None, false),
        };

        let (tube_distance, mean_error, admissible_ratio) = match points {
            Some(points) if !points.is_empty() => {
                let tube = level
                    .centers()
                    .map(|c| points.points().map(|x| dist(c, x)).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max);
                let floor = if c1.is_finite() { c1 * radius / 2.0 } else { 0.0 };
                let per_point = points
                    .as_slice()
                    .par_chunks_exact(gmra.dim)
                    .map(|x| {
                        let kx = level.nearest_center(x)?;
                        let near = dist(x, level.center(kx));
                        let err = dist(x, &level.project(kx, x)?);
                        let bound = 16.0 * near.max(floor);
                        let mut worst = 0.0f64;
                        for q in 0..level.len() {
                            if dist(x, level.center(q)) <= bound {
                                worst = worst.max(dist(x, &level.project(q, x)?));
                            }
                        }
                        Ok((err, worst))
                    })
                    .collect::<Result<Vec<(f64, f64)>>>()?;
                let mean = per_point.iter().map(|p| p.0).sum::<f64>() / per_point.len() as f64;
                let adm = per_point.iter().map(|p| p.1).fold(0.0, f64::max) / radius;
                (Some(tube), Some(mean), Some(adm))
            }
            _ => (None, None, None),
        };

        out.push(LevelAudit {
            scale: level.scale,
            cells: k,
            separation_c1: c1,
            parent_c2,
            parent_violation,
            tube_distance,
            mean_error,
            admissible_ratio,
            degenerate_cells: level.degenerate_cells(),
            spectral_ties: level.spectral_ties,
        });
    }

    let samples: Vec<(f64, f64)> = out
        .iter()
        .filter_map(|l| l.mean_error.filter(|&e| e > 0.0).map(|e| (l.scale as f64, e.log2())))
        .collect();
    let (decay_exponent, decay_intercept) = match fit_line(&samples) {
        Some((slope, intercept)) => (Some(-slope), Some(intercept)),
        None => (None, None),
    };
    Ok(GmraAudit {
        levels: out,
        decay_exponent,
        decay_intercept,
    })
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
pub fn fit_line(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
