//! The cap-hull `conv(P_S(P ∩ B(0, 2)))` of an affine piece `P`.
//!
//! With `c = P(0)` (the foot point of `P`) the hull is
//!
//! ```text
//! { z : |z| <= 1,  z ∈ span(P),  <z, c> >= |c|^2 / 2 }
//! ```
//!
//! and `span(P) ∩ B(0, 1)` when `0 ∈ P`. Everything here works in reduced
//! coordinates `u = B z`, where the rows of `B` are `Φ` followed (when
//! `c != 0`) by `c / |c|`. In those coordinates the half-space is simply
//! `u_last >= |c| / 2`, so the hull is a ball cut by one axis-aligned plane.

use crate::error::{check_dim, Error, Result};
use crate::gmra::GmraLevel;
use crate::linalg::{axpy, dot, mat_t_vec, mat_vec, norm};

/// Foot-point norm below which the piece counts as passing through 0.
pub const ORIGIN_TOL: f64 = 1e-10;
/// Default slack for [`FeasibleCap::contains`].
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCap {
    dim: usize,
    /// `rows x dim`, orthonormal rows.
    basis: Vec<f64>,
    rows: usize,
    foot: Vec<f64>,
    foot_norm: f64,
    contains_origin: bool,
}

impl FeasibleCap {
    /// Cap-hull of cell `k` of `level`.
    pub fn from_level(level: &GmraLevel, k: usize, origin_tol: f64) -> Result<Self> {
        if k >= level.len() {
            return Err(Error::Index { index: k, len: level.len() });
        }
        Self::from_affine(level.center(k), level.basis(k), level.ambient_dim(), origin_tol)
    }

    /// Cap-hull of the affine space `center + rowspan(basis)`, where `basis`
    /// has orthonormal rows of length `dim`.
    pub fn from_affine(center: &[f64], basis: &[f64], dim: usize, origin_tol: f64) -> Result<Self> {
        check_dim(dim, center.len())?;
        if basis.len() % dim != 0 {
            return Err(Error::Dimension {
                expected: dim,
                found: basis.len() % dim,
            });
        }
        // c = ĉ - ΦᵀΦ ĉ
        let coeffs = mat_vec(basis, dim, center);
        let mut foot = center.to_vec();
        axpy(-1.0, &mat_t_vec(basis, dim, &coeffs), &mut foot);
        let foot_norm = norm(&foot);
        if foot_norm > 2.0 {
            return Err(Error::InfeasibleCell { c_norm: foot_norm });
        }
        let contains_origin = foot_norm <= origin_tol;
        let mut b = basis.to_vec();
        if contains_origin {
            foot.iter_mut().for_each(|v| *v = 0.0);
        } else {
            b.extend(foot.iter().map(|v| v / foot_norm));
        }
        let rows = b.len() / dim;
        Ok(Self {
            dim,
            basis: b,
            rows,
            foot,
            foot_norm: if contains_origin { 0.0 } else { foot_norm },
            contains_origin,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the reduced space: `d`, or `d + 1` when `c != 0`.
    pub fn reduced_dim(&self) -> usize {
        self.rows
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// `c = P(0)`.
    pub fn foot(&self) -> &[f64] {
        &self.foot
    }

    pub fn foot_norm(&self) -> f64 {
        self.foot_norm
    }

    pub fn contains_origin(&self) -> bool {
        self.contains_origin
    }

    /// Lower bound on the last reduced coordinate, `|c| / 2`.
    pub fn half_space_offset(&self) -> Option<f64> {
        (!self.contains_origin).then_some(self.foot_norm / 2.0)
    }

    /// `u = B z`.
    pub fn reduce(&self, z: &[f64]) -> Vec<f64> {
        mat_vec(&self.basis, self.dim, z)
    }

    /// `z = Bᵀ u`.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        mat_t_vec(&self.basis, self.dim, u)
    }

    /// The three convex constraints, each with slack `tol`.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        if z.len() != self.dim || norm(z) > 1.0 + tol {
            return false;
        }
        let back = self.lift(&self.reduce(z));
        let off_span = z.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if off_span > tol {
            return false;
        }
        self.contains_origin || dot(z, &self.foot) >= 0.5 * self.foot_norm * self.foot_norm - tol
    }

    /// Same test in reduced coordinates (no span condition).
    pub fn contains_reduced(&self, u: &[f64], tol: f64) -> bool {
        norm(u) <= 1.0 + tol
            && self
                .half_space_offset()
                .is_none_or(|h| u[self.rows - 1] >= h - tol)
    }

    /// Euclidean projection onto the cap in reduced coordinates.
    ///
    /// The set is a unit ball intersected with `{u_last >= h}`; the
    /// projection is the ball projection, the half-space projection, or the
    /// nearest point of the circle where the two boundaries meet.
    pub fn project_reduced(&self, u: &[f64]) -> Vec<f64> {
        let n = norm(u);
        let Some(h) = self.half_space_offset() else {
            return if n <= 1.0 { u.to_vec() } else { u.iter().map(|v| v / n).collect() };
        };
        let last = self.rows - 1;
        if n <= 1.0 && u[last] >= h {
            return u.to_vec();
        }
        if n > 1.0 && u[last] / n >= h {
            return u.iter().map(|v| v / n).collect();
        }
        let mut perp = u.to_vec();
        perp[last] = 0.0;
        let perp_norm = norm(&perp);
        if u[last] < h && perp_norm * perp_norm + h * h <= 1.0 {
            let mut out = perp;
            out[last] = h;
            return out;
        }
        let rim = (1.0 - h * h).max(0.0).sqrt();
        let mut out = vec![0.0; self.rows];
        if perp_norm > 0.0 {
            for (o, p) in out.iter_mut().zip(&perp) {
                *o = rim * p / perp_norm;
            }
        } else if self.rows > 1 {
            out[0] = rim;
        }
        out[last] = h;
        out
    }

    /// Nearest point of the cap to `z`.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        self.lift(&self.project_reduced(&self.reduce(z)))
    }

    /// Minimizer of `<w, z>` over the cap, in closed form.
    ///
    /// Conventions for constant objectives: `w ⊥ span` returns `P_S(c)`, or
    /// the first basis direction when the piece passes through 0. If the
    /// reduced objective is parallel to `c` and the ball minimizer is cut off,
    /// the center of the flat face is returned.
    pub fn minimize_linear(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        Ok(self.lift(&self.minimize_linear_reduced(&self.reduce(w))))
    }

    pub fn minimize_linear_reduced(&self, w_hat: &[f64]) -> Vec<f64> {
        let r = self.rows;
        let wn = norm(w_hat);
        let Some(h) = self.half_space_offset() else {
            let mut u = vec![0.0; r];
            if wn > 0.0 {
                u.iter_mut().zip(w_hat).for_each(|(a, b)| *a = -b / wn);
            } else if r > 0 {
                u[0] = 1.0;
            }
            return u;
        };
        let last = r - 1;
        let mut u = vec![0.0; r];
        if wn == 0.0 {
            u[last] = 1.0;
            return u;
        }
        if -w_hat[last] / wn >= h {
            u.iter_mut().zip(w_hat).for_each(|(a, b)| *a = -b / wn);
            return u;
        }
        let mut perp = w_hat.to_vec();
        perp[last] = 0.0;
        let pn = norm(&perp);
        if pn > 0.0 {
            let rim = (1.0 - h * h).max(0.0).sqrt();
            u.iter_mut().zip(&perp).for_each(|(a, b)| *a = -rim * b / pn);
        }
        u[last] = h;
        u
    }

    /// For `z` in the cap with `c != 0`, the point `z' = (|c|^2 / <z, c>) z`
    /// of `P ∩ B(0, 2)` whose sphere projection generates `z`.
    pub fn preimage(&self, z: &[f64]) -> Option<Vec<f64>> {
        if self.contains_origin {
            return None;
        }
        let zc = dot(z, &self.foot);
        if zc <= 0.0 {
            return None;
        }
        let s = self.foot_norm * self.foot_norm / zc;
        Some(z.iter().map(|v| v * s).collect())
    }
}
