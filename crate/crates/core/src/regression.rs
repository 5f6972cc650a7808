//! Kernel ridge regression over pair samples, the spectral smoother and the
//! regularization bias, and the bias comparisons between a kernel and its
//! permutation-invariant, symmetric and anti-symmetric forms.
//!
//! Inner products over a sample of `n` pairs are the empirical ones,
//! `⟨a, b⟩ = (1/n) Σ aᵢ bᵢ`, matching the empirical operator `T = G / n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{build_gram, normalize_pairwise, BaseKernel, GramMatrix, KernelSpec, PairSample, PointSet, Transform};
use crate::linalg;
use crate::spectral::{empirical_operator, permutation_matrix, CheckResult, ProjectionPair, Spectrum};
use crate::testbed::{gen_points, SmoothTarget, TargetKind};

/// Relative slack for the bias sandwich in reports.
pub const BIAS_BOUND_TOL: f64 = 1e-10;
/// Relative tolerance for the bias equality between matched kernels.
pub const BIAS_EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    Generic,
}

impl std::str::FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "antisymmetric" => Ok(Self::Antisymmetric),
            "generic" => Ok(Self::Generic),
            other => Err(Error::Parse(format!("unknown symmetry `{other}`"))),
        }
    }
}

/// A target function tabulated on the pairs of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    pub values: Vec<f64>,
    pub symmetry: Symmetry,
}

impl TargetFunction {
    pub fn new(values: Vec<f64>, symmetry: Symmetry) -> Self {
        Self { values, symmetry }
    }

    /// Checks the declared symmetry against the swap permutation of the sample.
    pub fn validate(&self, proj: &ProjectionPair) -> Result<()> {
        if self.values.len() != proj.len() {
            return Err(Error::DimensionMismatch { expected: proj.len(), got: self.values.len() });
        }
        let sign = match self.symmetry {
            Symmetry::Symmetric => 1.0,
            Symmetry::Antisymmetric => -1.0,
            Symmetry::Generic => return Ok(()),
        };
        for (a, &b) in proj.perm().iter().enumerate() {
            if (self.values[a] - sign * self.values[b]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "target is not {:?} at pair position {a}",
                    self.symmetry
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedSolution {
    pub coefficients: Vec<f64>,
    pub reg: f64,
    pub spec_id: String,
    pub sample_id: String,
}

fn check_reg(reg: f64) -> Result<()> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularization {reg} must be > 0")));
    }
    Ok(())
}

/// Dual ridge solution `α = (G + reg·n·I)⁻¹ y`.
///
/// This minimizes `(1/n) Σ (yᵢ − (Gα)ᵢ)² + reg · αᵀGα`, so `reg` plays the
/// same role as the regularization of the empirical operator `G / n`.
pub fn krr_fit(g: &GramMatrix, y: &[f64], reg: f64) -> Result<RegularizedSolution> {
    check_reg(reg)?;
    let n = g.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let system = &g.values + DMatrix::<f64>::identity(n, n) * (reg * n as f64);
    let rhs = DVector::from_column_slice(y);
    let alpha = linalg::spd_solve(&system, &rhs)?;
    let residual = (&system * &alpha - &rhs).norm();
    if !(residual <= 1e-8 * rhs.norm()) && residual > 0.0 {
        return Err(Error::SolveFailed { condition: residual / rhs.norm().max(f64::MIN_POSITIVE) });
    }
    Ok(RegularizedSolution {
        coefficients: alpha.as_slice().to_vec(),
        reg,
        spec_id: g.spec_id.clone(),
        sample_id: g.sample_id.clone(),
    })
}

/// Representer expansion `Σᵢ αᵢ k(trainᵢ, test_t)` at every test pair.
pub fn krr_predict(
    spec: &KernelSpec,
    points: &PointSet,
    train: &PairSample,
    sol: &RegularizedSolution,
    test: &PairSample,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if sol.coefficients.len() != train.len() {
        return Err(Error::DimensionMismatch { expected: train.len(), got: sol.coefficients.len() });
    }
    train.check_indices(points.len())?;
    test.check_indices(points.len())?;
    let train_pairs: Vec<_> = train.pairs().iter().map(|&(i, j)| (points.point(i), points.point(j))).collect();
    Ok(test
        .pairs()
        .iter()
        .map(|&(i, j)| expand(spec, &train_pairs, &sol.coefficients, (points.point(i), points.point(j))))
        .collect())
}

fn expand(spec: &KernelSpec, train: &[(&[f64], &[f64])], alpha: &[f64], query: (&[f64], &[f64])) -> f64 {
    train.iter().zip(alpha).map(|(&t, &a)| a * spec.eval_unchecked(t, query)).sum()
}

fn check_operator(t: &Spectrum, f: &[f64], reg: f64) -> Result<()> {
    check_reg(reg)?;
    if f.len() != t.vectors.nrows() {
        return Err(Error::DimensionMismatch { expected: t.vectors.nrows(), got: f.len() });
    }
    Ok(())
}

/// `f^λ = V Λ (Λ + λI)⁻¹ Vᵀ f` in sample coordinates.
pub fn regularized_smoother(t: &Spectrum, f: &[f64], reg: f64) -> Result<Vec<f64>> {
    check_operator(t, f, reg)?;
    let f = DVector::from_column_slice(f);
    let mut coords = t.vectors.tr_mul(&f);
    for (c, &l) in coords.iter_mut().zip(&t.values) {
        *c *= l / (l + reg);
    }
    Ok((&t.vectors * coords).as_slice().to_vec())
}

/// `ε = λ² ⟨f, (T + λI)⁻² f⟩` in the empirical inner product.
pub fn regularization_bias(t: &Spectrum, f: &[f64], reg: f64) -> Result<f64> {
    check_operator(t, f, reg)?;
    let n = f.len() as f64;
    let coords = t.vectors.tr_mul(&DVector::from_column_slice(f));
    // Weight each coordinate by λ/(μ+λ) so null-space components pass through exactly.
    let sum: f64 = coords.iter().zip(&t.values).map(|(c, &l)| (c * (reg / (l + reg))).powi(2)).sum();
    Ok(sum / n)
}

/// `(1/n) Σ xᵢ²`.
pub fn empirical_sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Multipliers `(lower, upper)` bounding the permutation-invariant kernel's bias
/// by the original kernel's bias at regularization `reg`, for a normalized kernel.
pub fn bias_factors(reg: f64) -> (f64, f64) {
    let a2 = reg * reg;
    let b2 = (reg + 1.0) * (reg + 1.0);
    let lower = 1.0 - (a2 - b2).powi(2) / (a2 + b2).powi(2);
    let upper = 1.0 + 1.0 / (4.0 * a2 + 4.0 * reg);
    (lower, upper)
}

/// Checks `lower·bias_full − tol <= bias_pi <= upper·bias_full + tol`.
pub fn bias_bound_check(bias_full: f64, bias_pi: f64, reg: f64, tol: f64) -> CheckResult {
    let (lower, upper) = bias_factors(reg);
    let lower_margin = bias_pi - lower * bias_full;
    let upper_margin = upper * bias_full - bias_pi;
    CheckResult::new("bias_bounds", lower_margin.min(upper_margin), tol)
        .with("reg", reg)
        .with("lower_factor", lower)
        .with("upper_factor", upper)
        .with("lower_margin", lower_margin)
        .with("upper_margin", upper_margin)
}

/// Relative equality `|bias_pi − bias_matched| <= tol · bias_pi`.
pub fn bias_equality_check(bias_pi: f64, bias_matched: f64, tol: f64) -> CheckResult {
    let rel = (bias_pi - bias_matched).abs() / bias_pi.max(1e-300);
    CheckResult::residual("bias_equality", rel, tol)
        .with("bias_pi", bias_pi)
        .with("bias_matched", bias_matched)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub reg: f64,
    pub bias_full: f64,
    pub bias_pi: f64,
    pub bias_s: f64,
    pub bias_a: f64,
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub bounds_hold: bool,
    pub equality_holds: bool,
}

/// Empirical operators of a normalized kernel and its three projected forms on one sample.
#[derive(Debug, Clone)]
pub struct TransformSpectra {
    pub spec: KernelSpec,
    pub full: Spectrum,
    pub pi: Spectrum,
    pub s: Spectrum,
    pub a: Spectrum,
}

impl TransformSpectra {
    /// Normalizes `spec` on the sample and decomposes `G/n` for the transforms
    /// none, permutation invariant, symmetric and anti-symmetric.
    pub fn new(spec: &KernelSpec, points: &PointSet, sample: &PairSample) -> Result<Self> {
        let spec = normalize_pairwise(&spec.with_transform(Transform::None), points, sample)?;
        let op = |t: Transform| -> Result<Spectrum> {
            empirical_operator(&build_gram(&spec.with_transform(t), points, sample)?)
        };
        Ok(Self {
            spec,
            full: op(Transform::None)?,
            pi: op(Transform::PermutationInvariant)?,
            s: op(Transform::Symmetric)?,
            a: op(Transform::Antisymmetric)?,
        })
    }

    pub fn report(&self, target: &TargetFunction, reg: f64) -> Result<BiasReport> {
        let f = &target.values;
        let bias_full = regularization_bias(&self.full, f, reg)?;
        let bias_pi = regularization_bias(&self.pi, f, reg)?;
        let bias_s = regularization_bias(&self.s, f, reg)?;
        let bias_a = regularization_bias(&self.a, f, reg)?;
        let (lower_factor, upper_factor) = bias_factors(reg);
        let bounds_hold = bias_bound_check(bias_full, bias_pi, reg, BIAS_BOUND_TOL * bias_full).passed;
        let matched = match target.symmetry {
            Symmetry::Symmetric => bias_s,
            Symmetry::Antisymmetric => bias_a,
            Symmetry::Generic => unreachable!("validated by bias_reports"),
        };
        let equality_holds = bias_equality_check(bias_pi, matched, BIAS_EQUALITY_TOL).passed;
        Ok(BiasReport {
            reg,
            bias_full,
            bias_pi,
            bias_s,
            bias_a,
            lower_factor,
            upper_factor,
            bounds_hold,
            equality_holds,
        })
    }
}

/// Bias reports at each regularization value for a symmetric or anti-symmetric
/// target on a swap-closed sample. The kernel is normalized on the sample first.
pub fn bias_reports(
    spec: &KernelSpec,
    points: &PointSet,
    sample: &PairSample,
    target: &TargetFunction,
    regs: &[f64],
) -> Result<Vec<BiasReport>> {
    if target.symmetry == Symmetry::Generic {
        return Err(Error::InvalidArgument(
            "bias comparison needs a symmetric or antisymmetric target".into(),
        ));
    }
    let proj = permutation_matrix(sample)?;
    target.validate(&proj)?;
    let spectra = TransformSpectra::new(spec, points, sample)?;
    regs.iter().map(|&r| spectra.report(target, r)).collect()
}

/// Settings of the approximation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub dim: usize,
    pub reg: f64,
    pub grid_per_axis: usize,
    pub max_eval_pairs: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { dim: 2, reg: 1e-6, grid_per_axis: 15, max_eval_pairs: 225 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    /// Number of sampled points; the training sample holds `2·⌊n/2⌋` pairs.
    pub n: usize,
    pub sup_error: f64,
    /// Largest deviation of the fitted function from the target's swap symmetry.
    pub swap_residual: f64,
}

/// Deterministic evaluation grid: tensor grid over `[0,1]^d`, all ordered
/// pairs, thinned by a fixed stride to at most `max_eval_pairs`.
pub fn evaluation_grid(cfg: &DecayConfig) -> Result<(PointSet, Vec<(usize, usize)>)> {
    if cfg.dim == 0 || cfg.grid_per_axis < 2 || cfg.max_eval_pairs == 0 {
        return Err(Error::InvalidArgument("degenerate evaluation grid".into()));
    }
    let m = cfg.grid_per_axis;
    let count = m.checked_pow(cfg.dim as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
    let mut coords = Vec::with_capacity(count * cfg.dim);
    for idx in 0..count {
        let mut rest = idx;
        for _ in 0..cfg.dim {
            coords.push((rest % m) as f64 / (m - 1) as f64);
            rest /= m;
        }
    }
    let grid = PointSet::from_flat(cfg.dim, coords)?;
    let total = count * count;
    let take = total.min(cfg.max_eval_pairs);
    let pairs = (0..take)
        .map(|k| {
            let flat = k * total / take;
            (flat / count, flat % count)
        })
        .collect();
    Ok((grid, pairs))
}

/// Fits `target` with growing samples and records the sup error over the evaluation grid.
pub fn approximation_decay(
    spec: &KernelSpec,
    target_kind: TargetKind,
    sizes: &[usize],
    seed: u64,
    cfg: &DecayConfig,
) -> Result<Vec<DecayPoint>> {
    let expected = match target_kind {
        TargetKind::Antisymmetric | TargetKind::Ranking => Transform::Antisymmetric,
        TargetKind::Symmetric => Transform::Symmetric,
        TargetKind::Generic => {
            return Err(Error::InvalidArgument("approximation targets must be symmetric, antisymmetric or ranking".into()))
        }
    };
    if spec.transform != expected {
        return Err(Error::InvalidSpec(format!(
            "{:?} targets need the {} transform",
            target_kind,
            expected.name()
        )));
    }
    if !matches!(spec.base, BaseKernel::Gaussian { .. }) {
        return Err(Error::InvalidSpec("approximation needs a universal (gaussian) base kernel".into()));
    }
    let target = SmoothTarget::new(target_kind, cfg.dim, seed);
    approximation_decay_for(spec, &|v, w| target.eval(v, w), target_kind.symmetry(), sizes, seed, cfg)
}

/// [`approximation_decay`] with an arbitrary target function.
pub fn approximation_decay_for(
    spec: &KernelSpec,
    target: &dyn Fn(&[f64], &[f64]) -> f64,
    symmetry: Symmetry,
    sizes: &[usize],
    seed: u64,
    cfg: &DecayConfig,
) -> Result<Vec<DecayPoint>> {
    spec.validate()?;
    if sizes.is_empty() || sizes.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument("sizes must be non-empty and each at least 2".into()));
    }
    let max_n = *sizes.iter().max().expect("non-empty");
    // Prefixes of one point stream, so the training sets are nested.
    let points = gen_points(max_n, cfg.dim, crate::testbed::derive_seed(seed, 1))?;
    let (grid, eval_pairs) = evaluation_grid(cfg)?;
    let sign = match symmetry {
        Symmetry::Antisymmetric => -1.0,
        _ => 1.0,
    };

    sizes
        .iter()
        .map(|&n| {
            let m = n / 2;
            let mut pairs: Vec<(usize, usize)> = (0..m).map(|k| (2 * k, 2 * k + 1)).collect();
            pairs.extend((0..m).map(|k| (2 * k + 1, 2 * k)));
            let labels: Vec<f64> = pairs.iter().map(|&(i, j)| target(points.point(i), points.point(j))).collect();
            let sample = PairSample::new(pairs, Some(labels.clone()))?;
            let g = build_gram(spec, &points, &sample)?;
            let sol = krr_fit(&g, &labels, cfg.reg)?;
            let train: Vec<_> = sample.pairs().iter().map(|&(i, j)| (points.point(i), points.point(j))).collect();

            let mut sup_error = 0.0f64;
            let mut swap_residual = 0.0f64;
            for &(i, j) in &eval_pairs {
                let (u, v) = (grid.point(i), grid.point(j));
                let forward = expand(spec, &train, &sol.coefficients, (u, v));
                let backward = expand(spec, &train, &sol.coefficients, (v, u));
                sup_error = sup_error.max((forward - target(u, v)).abs());
                if symmetry != Symmetry::Generic {
                    swap_residual = swap_residual.max((forward - sign * backward).abs());
                }
            }
            Ok(DecayPoint { n, sup_error, swap_residual })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigh_psd_matrix;
    use approx::assert_abs_diff_eq;

    fn single(value: f64) -> Spectrum {
        Spectrum { values: vec![value], vectors: DMatrix::identity(1, 1), trace: value }
    }

    #[test]
    fn krr_fit_identity() {
        let g = GramMatrix::from_matrix(DMatrix::identity(2, 2), "I", "s").unwrap();
        let sol = krr_fit(&g, &[1.0, 0.0], 0.5).unwrap();
        assert_abs_diff_eq!(sol.coefficients[0], 0.5, epsilon = 1e-15);
        assert_eq!(sol.coefficients[1], 0.0);
        assert!(krr_fit(&g, &[1.0, 0.0], 0.0).is_err());
        assert!(krr_fit(&g, &[1.0], 1.0).is_err());
    }

    #[test]
    fn krr_limits() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let g = GramMatrix::from_matrix(m.clone(), "g", "s").unwrap();
        let y = [1.0, -0.5];
        let big = krr_fit(&g, &y, 1e8).unwrap();
        assert!(big.coefficients.iter().all(|a| a.abs() < 1e-8));
        let small = krr_fit(&g, &y, 1e-12).unwrap();
        let fitted = &m * DVector::from_vec(small.coefficients);
        assert_abs_diff_eq!(fitted[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fitted[1], -0.5, epsilon = 1e-9);
    }

    #[test]
    fn smoother_examples() {
        let t = single(1.0);
        assert_eq!(regularized_smoother(&t, &[2.0], 1.0).unwrap(), vec![1.0]);
        let t = single(0.0);
        assert_eq!(regularized_smoother(&t, &[2.0], 1.0).unwrap(), vec![0.0]);
        let t = Spectrum { values: vec![1.5, 0.5], vectors: DMatrix::identity(2, 2), trace: 2.0 };
        let out = regularized_smoother(&t, &[1.0, 1.0], 0.5).unwrap();
        assert_abs_diff_eq!(out[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.5, epsilon = 1e-15);
        assert!(regularized_smoother(&t, &[1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn bias_examples() {
        // n = 1, so the eigenvector (1) has empirical norm 1.
        assert_eq!(regularization_bias(&single(1.0), &[1.0], 1.0).unwrap(), 0.25);
        assert_eq!(regularization_bias(&single(0.0), &[3.0], 0.7).unwrap(), 9.0);
        assert!(regularization_bias(&single(1.0), &[1.0], 1e-9).unwrap() < 1e-17);
        assert!(regularization_bias(&single(1.0), &[1.0], 0.0).is_err());
    }

    #[test]
    fn factors_at_one() {
        let (lo, hi) = bias_factors(1.0);
        assert_abs_diff_eq!(lo, 0.64, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.125, epsilon = 1e-15);
        for r in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            let (lo, hi) = bias_factors(r);
            assert!(lo <= 1.0 && hi >= 1.0);
            assert!(bias_bound_check(0.3, 0.3, r, 0.0).passed);
        }
        assert!(!bias_bound_check(1.0, 2.0, 1.0, 1e-12).passed);
        assert!(!bias_bound_check(1.0, 0.5, 1.0, 1e-12).passed);
    }

    #[test]
    fn two_by_two_bias_pipeline() {
        // G = [[2,1],[1,2]] normalized to unit diagonal; P·G·P = G so K^PI = K.
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]) / 2.0;
        let t = eigh_psd_matrix(&(&g / 2.0)).unwrap();
        let f = [1.0, 1.0];
        let full = regularization_bias(&t, &f, 1.0).unwrap();
        // T = [[.5,.25],[.25,.5]]: f lies on eigenvalue 0.75, ε = 1/(1.75)² · ‖f‖² = 1/3.0625.
        assert_abs_diff_eq!(full, 1.0 / 3.0625, epsilon = 1e-14);
        assert!(bias_bound_check(full, full, 1.0, 1e-12).passed);
    }

    #[test]
    fn equality_examples() {
        assert!(bias_equality_check(0.0, 0.0, 1e-9).passed);
        assert!(bias_equality_check(1.0, 1.0 + 1e-12, 1e-9).passed);
        assert!(!bias_equality_check(1.0, 1.1, 1e-9).passed);
    }

    #[test]
    fn target_validation() {
        let p = ProjectionPair::from_perm(vec![1, 0, 2]).unwrap();
        assert!(TargetFunction::new(vec![1.0, 1.0, 5.0], Symmetry::Symmetric).validate(&p).is_ok());
        assert!(TargetFunction::new(vec![1.0, -1.0, 0.0], Symmetry::Antisymmetric).validate(&p).is_ok());
        assert!(TargetFunction::new(vec![1.0, -1.0, 1.0], Symmetry::Antisymmetric).validate(&p).is_err());
        assert!(TargetFunction::new(vec![1.0, 2.0, 1.0], Symmetry::Generic).validate(&p).is_ok());
    }

    #[test]
    fn grid_shape() {
        let (grid, pairs) = evaluation_grid(&DecayConfig { dim: 1, ..Default::default() }).unwrap();
        assert_eq!(grid.len(), 15);
        assert_eq!(pairs.len(), 225);
        assert_eq!(grid.point(14), &[1.0]);
        let (grid, pairs) = evaluation_grid(&DecayConfig::default()).unwrap();
        assert_eq!(grid.len(), 225);
        assert_eq!(pairs.len(), 225);
        assert!(grid.iter().all(|p| p.iter().all(|&c| (0.0..=1.0).contains(&c))));
    }

    #[test]
    fn decay_rejects_bad_input() {
        let cfg = DecayConfig::default();
        let t = KernelSpec::transitive(BaseKernel::Gaussian { gamma: 20.0 });
        assert!(approximation_decay(&t, TargetKind::Ranking, &[], 1, &cfg).is_err());
        assert!(approximation_decay(&t, TargetKind::Ranking, &[1], 1, &cfg).is_err());
        assert!(approximation_decay(&t, TargetKind::Symmetric, &[10], 1, &cfg).is_err());
        let lin = KernelSpec { base: BaseKernel::Linear, ..t };
        assert!(approximation_decay(&lin, TargetKind::Ranking, &[10], 1, &cfg).is_err());
    }

    #[test]
    fn zero_target_has_zero_error() {
        let cfg = DecayConfig::default();
        let out = approximation_decay_for(&KernelSpec::transitive(BaseKernel::Gaussian { gamma: 20.0 }), &|_, _| 0.0, Symmetry::Antisymmetric, &[10, 20], 3, &cfg)
            .unwrap();
        assert!(out.iter().all(|p| p.sup_error == 0.0));
    }
}
