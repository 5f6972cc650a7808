//! Dense symmetric eigensolver (cyclic Jacobi) and SPD solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Residual tolerance relative to the matrix scale (trace for PSD input).
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

/// Scale used for relative tolerances: the trace for PSD matrices, never below
/// the Frobenius norm so indefinite input gets a meaningful yardstick.
pub fn matrix_scale(a: &DMatrix<f64>) -> f64 {
    a.trace().max(a.norm())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Only the upper triangle is read. Output is deterministic: rotations are
/// applied in fixed row-cyclic order and eigenvalue ties keep their diagonal
/// order.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if let Some(pos) = a.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { location: format!("matrix entry {pos}") });
    }

    let mut m = DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(n, n);
    let frob = m.norm();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m);
        if off <= 1e-15 * frob || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual: off });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Off-diagonal already negligible next to both diagonal entries.
                if sweeps > 4 && apq.abs() * 1e17 < app.abs().min(aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(m.as_mut_slice(), v.as_mut_slice(), n, p, q, c, s);
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps first-occurrence order among equal eigenvalues.
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);

    let residual = eigen_residual(a, &values, &vectors);
    let scale = matrix_scale(a);
    if residual > RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) && residual > 0.0 {
        return Err(Error::NoConvergence { sweeps, residual });
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for j in 1..n {
        for i in 0..j {
            s += 2.0 * m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// Applies the rotation in the `(p, q)` plane to the off-diagonal entries of
/// rows and columns `p`, `q` of the column-major symmetric matrix `m`, and to
/// columns `p`, `q` of `v`. The `(p, q)` block is set by the caller.
#[inline]
fn rotate(m: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let mkp = m[p * n + k];
        let mkq = m[q * n + k];
        let new_p = c * mkp - s * mkq;
        let new_q = s * mkp + c * mkq;
        m[p * n + k] = new_p;
        m[k * n + p] = new_p;
        m[q * n + k] = new_q;
        m[k * n + q] = new_q;
    }
    let (vp, vq) = (p * n, q * n);
    for k in 0..n {
        let a = v[vp + k];
        let b = v[vq + k];
        v[vp + k] = c * a - s * b;
        v[vq + k] = s * a + c * b;
    }
}

/// Max-entry residual `‖A·V − V·diag(values)‖`.
pub fn eigen_residual(a: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let av = a * vectors;
    let mut worst = 0.0f64;
    for (c, &lambda) in values.iter().enumerate() {
        for r in 0..a.nrows() {
            worst = worst.max((av[(r, c)] - lambda * vectors[(r, c)]).abs());
        }
    }
    worst
}

/// Solves `a·x = b` for symmetric positive-definite `a` via Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::SolveFailed { condition: diagonal_condition(a) }),
    }
}

/// Cheap condition estimate from the diagonal spread; infinite when a pivot is non-positive.
fn diagonal_condition(a: &DMatrix<f64>) -> f64 {
    let d = a.diagonal();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(0.0, f64::max);
    if lo <= 0.0 { f64::INFINITY } else { hi / lo }
}

/// Largest absolute entry of `a − b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_spectrum() {
        let e = symmetric_eigen(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.column(0);
        assert_abs_diff_eq!(v0[0].abs(), h, epsilon = 1e-14);
        assert_abs_diff_eq!(v0[0], v0[1], epsilon = 1e-14);
        let v1 = e.vectors.column(1);
        assert_abs_diff_eq!(v1[0], -v1[1], epsilon = 1e-14);
    }

    #[test]
    fn rank_one() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let e = symmetric_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_ties_keep_order() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 1.0]));
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![5.0, 1.0, 1.0]);
        assert_eq!(e.vectors[(0, 1)], 1.0);
        assert_eq!(e.vectors[(2, 2)], 1.0);
    }

    #[test]
    fn rejects_non_square_and_nan() {
        assert!(symmetric_eigen(&DMatrix::zeros(2, 3)).is_err());
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(symmetric_eigen(&a).is_err());
    }

    #[test]
    fn zero_matrix() {
        let e = symmetric_eigen(&DMatrix::zeros(4, 4)).unwrap();
        assert!(e.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spd_solve_identity() {
        let a = DMatrix::<f64>::identity(2, 2) * 2.0;
        let x = spd_solve(&a, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
        assert!(spd_solve(&DMatrix::zeros(2, 2), &DVector::zeros(2)).is_err());
    }
}
