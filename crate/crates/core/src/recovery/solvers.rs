//! Step-II solvers other than the linear cap minimizer.

use crate::error::{check_dim, Error, Result};
use crate::gmra::GmraLevel;
use crate::linalg::{dot, mat_t_vec, mat_vec, norm};
use crate::measure::{BitVector, Ensemble};

use super::cap::FeasibleCap;

/// Minimizer of `<w, z>` over `{z ∈ P_{j,k}, |z| <= radius}`.
///
/// Writing `z = c + Φᵀ v` with `c = P_{j,k}(0)`, the disk is
/// `|v| <= sqrt(R^2 - |c|^2)` and the minimizer is `v = -r Φw / |Φw|`.
pub fn solve_linear_on_disk(level: &GmraLevel, k: usize, w: &[f64], radius: f64) -> Result<Vec<f64>> {
    if k >= level.len() {
        return Err(Error::Index { index: k, len: level.len() });
    }
    solve_linear_on_affine_disk(level.center(k), level.basis(k), level.ambient_dim(), w, radius)
}

/// [`solve_linear_on_disk`] for the affine space `center + rowspan(basis)`.
pub fn solve_linear_on_affine_disk(center: &[f64], basis: &[f64], dim: usize, w: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    check_dim(dim, w.len())?;
    check_dim(dim, center.len())?;
    let coeffs = mat_vec(basis, dim, center);
    let foot: Vec<f64> = center
        .iter()
        .zip(mat_t_vec(basis, dim, &coeffs))
        .map(|(a, b)| a - b)
        .collect();
    let c_norm = norm(&foot);
    if c_norm > radius {
        return Err(Error::Infeasible { c_norm, radius });
    }
    let r = (radius * radius - c_norm * c_norm).max(0.0).sqrt();
    let t = mat_vec(basis, dim, w);
    let tn = norm(&t);
    let dir = if tn > 0.0 {
        mat_t_vec(basis, dim, &t.iter().map(|v| v / tn).collect::<Vec<_>>())
    } else {
        basis[..dim].to_vec()
    };
    Ok(foot.iter().zip(&dir).map(|(c, v)| c - r * v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlusOptions {
    pub max_iter: usize,
    /// Step length at iteration `t` is `step_scale / sqrt(t)` along the
    /// normalized subgradient.
    pub step_scale: f64,
}

impl Default for PlusOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            step_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlusSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// `sum_l [(-y_l) <a_l, z>]_+`.
pub fn plus_objective(ensemble: &Ensemble, y: &BitVector, z: &[f64]) -> Result<f64> {
    check_dim(ensemble.rows(), y.len())?;
    let az = ensemble.measure(z)?;
    Ok(az
        .iter()
        .enumerate()
        .map(|(l, v)| (-f64::from(y.get(l)) * v).max(0.0))
        .sum())
}

/// Projected subgradient descent for `sum_l [(-y_l) <a_l, z>]_+` over the
/// cap, started at the linear minimizer. Returns the best iterate seen.
pub fn solve_plus_on_cap(
    cap: &FeasibleCap,
    ensemble: &Ensemble,
    y: &BitVector,
    options: &PlusOptions,
) -> Result<PlusSolution> {
    check_dim(cap.dim(), ensemble.dim())?;
    check_dim(ensemble.rows(), y.len())?;
    let r = cap.reduced_dim();
    // rows s_l * B a_l, so the objective is sum_l [<rows_l, u>]_+
    let rows: Vec<f64> = (0..ensemble.rows())
        .flat_map(|l| {
            let s = -f64::from(y.get(l));
            cap.reduce(ensemble.row(l)).into_iter().map(move |v| s * v)
        })
        .collect();
    let eval = |u: &[f64], grad: &mut [f64]| -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        for a in rows.chunks_exact(r) {
            let v = dot(a, u);
            if v > 0.0 {
                f += v;
                grad.iter_mut().zip(a).for_each(|(g, ai)| *g += ai);
            }
        }
        f
    };

    let w_hat: Vec<f64> = {
        let mut acc = vec![0.0; r];
        for a in rows.chunks_exact(r) {
            acc.iter_mut().zip(a).for_each(|(s, ai)| *s += ai);
        }
        acc
    };
    let mut u = cap.minimize_linear_reduced(&w_hat);
    let mut grad = vec![0.0; r];
    let mut best_f = eval(&u, &mut grad);
    let mut best_u = u.clone();
    let mut iterations = 0;
    for t in 1..=options.max_iter {
        let gn = norm(&grad);
        if best_f == 0.0 || gn == 0.0 {
            break;
        }
        let step = options.step_scale / (t as f64).sqrt() / gn;
        let moved: Vec<f64> = u.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        u = cap.project_reduced(&moved);
        iterations = t;
        let f = eval(&u, &mut grad);
        if f < best_f {
            best_f = f;
            best_u.clone_from(&u);
        }
    }
    Ok(PlusSolution {
        z: cap.lift(&best_u),
        objective: best_f,
        iterations,
    })
}
