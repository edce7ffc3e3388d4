//! Small dense vector helpers over `&[f64]`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Multiplies the row-major `rows x cols` matrix by `x`.
pub fn mat_vec(mat: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    mat.chunks_exact(cols).map(|row| dot(row, x)).collect()
}

/// Computes `mat^T u` for a row-major `rows x cols` matrix.
pub fn mat_t_vec(mat: &[f64], cols: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, &ui) in mat.chunks_exact(cols).zip(u) {
        axpy(ui, row, &mut out);
    }
    out
}

/// Extends the orthonormal rows in `basis` (row-major, `dim` columns) to
/// `target` rows by Gram-Schmidt against the ambient axes `e_0, e_1, ...`.
pub fn complete_orthonormal(basis: &mut Vec<f64>, dim: usize, target: usize) {
    let mut axis = 0;
    while basis.len() / dim < target && axis < dim {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for row in basis.chunks_exact(dim) {
                let p = dot(row, &v);
                axpy(-p, row, &mut v);
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            basis.extend(v.iter().map(|x| x / n));
        }
        axis += 1;
    }
}
