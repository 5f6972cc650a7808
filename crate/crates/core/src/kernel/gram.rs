use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{KernelSpec, PairSample, PointSet, Transform};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative PSD tolerance: eigenvalues down to `-PSD_TOL · trace` count as zero.
pub const PSD_TOL: f64 = 1e-10;

/// Gram matrix of a pairwise kernel over a pair sample. Exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub spec_id: String,
    pub sample_id: String,
}

impl GramMatrix {
    /// Wraps an existing matrix, checking exact symmetry (PSD is not checked).
    pub fn from_matrix(values: DMatrix<f64>, spec_id: impl Into<String>, sample_id: impl Into<String>) -> Result<Self> {
        let n = values.nrows();
        if n != values.ncols() {
            return Err(Error::DimensionMismatch { expected: n, got: values.ncols() });
        }
        if n == 0 {
            return Err(Error::Empty("gram matrix"));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { location: format!("gram entry {pos}") });
        }
        for j in 0..n {
            for i in 0..j {
                if values[(i, j)].to_bits() != values[(j, i)].to_bits() {
                    return Err(Error::InvalidArgument(format!(
                        "gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values, spec_id: spec_id.into(), sample_id: sample_id.into() })
    }

    /// Assembles the matrix without the PSD check.
    pub fn assemble(spec: &KernelSpec, points: &PointSet, sample: &PairSample) -> Result<Self> {
        spec.validate()?;
        if sample.is_empty() {
            return Err(Error::Empty("pair sample"));
        }
        sample.check_indices(points.len())?;
        let pairs = sample.pairs();
        let n = pairs.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let (i, j) = pairs[a];
                let pa = (points.point(i), points.point(j));
                pairs[a..]
                    .iter()
                    .map(|&(k, l)| spec.eval_unchecked(pa, (points.point(k), points.point(l))))
                    .collect()
            })
            .collect();
        let mut values = DMatrix::zeros(n, n);
        for (a, row) in rows.iter().enumerate() {
            for (off, &x) in row.iter().enumerate() {
                values[(a, a + off)] = x;
                values[(a + off, a)] = x;
            }
        }
        Ok(Self { values, spec_id: spec.id(), sample_id: sample.fingerprint() })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// Checks `min eigenvalue >= -PSD_TOL · trace`.
    ///
    /// A Cholesky factorization of the shifted matrix settles the common case;
    /// the eigensolver only runs to report the offending eigenvalue.
    pub fn check_psd(&self) -> Result<()> {
        let tol = PSD_TOL * self.trace().max(0.0);
        if tol == 0.0 {
            if self.values.iter().all(|&x| x == 0.0) {
                return Ok(());
            }
        } else {
            let n = self.len();
            let shifted = &self.values + DMatrix::<f64>::identity(n, n) * tol;
            if shifted.cholesky().is_some() {
                return Ok(());
            }
        }
        let eig = linalg::symmetric_eigen(&self.values)?;
        let min = *eig.values.last().expect("non-empty");
        if min >= -tol {
            Ok(())
        } else {
            Err(Error::NotPsd { min_eigenvalue: min, tolerance: tol })
        }
    }
}

/// Gram matrix of `spec` over `sample`, verified to be positive semi-definite.
pub fn build_gram(spec: &KernelSpec, points: &PointSet, sample: &PairSample) -> Result<GramMatrix> {
    let g = GramMatrix::assemble(spec, points, sample)?;
    g.check_psd()?;
    Ok(g)
}

/// Rescales `spec` so its largest diagonal value over the sample is 1.
///
/// Only the un-projected kernel (`none` or `permutation_invariant`) may be
/// normalized; the projected forms inherit the bound.
pub fn normalize_pairwise(spec: &KernelSpec, points: &PointSet, sample: &PairSample) -> Result<KernelSpec> {
    spec.validate()?;
    if !matches!(spec.transform, Transform::None | Transform::PermutationInvariant) {
        return Err(Error::InvalidSpec(format!(
            "normalization is defined for the none or permutation_invariant transform, not {}",
            spec.transform.name()
        )));
    }
    if sample.is_empty() {
        return Err(Error::Empty("pair sample"));
    }
    sample.check_indices(points.len())?;
    let unit = spec.with_scale(1.0);
    let max_diag = sample
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let p = (points.point(i), points.point(j));
            unit.eval_unchecked(p, p)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::DegenerateKernel(max_diag));
    }
    Ok(unit.with_scale(1.0 / max_diag))
}
