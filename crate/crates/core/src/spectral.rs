//! Spectra of Gram matrices and of the empirical integral operator, the swap
//! projections, effective dimension, and the spectral identity checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, PairSample, PSD_TOL};
use crate::linalg::{self, max_abs_diff};

/// Descending eigenvalues with aligned orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub trace: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Eigendecomposition of a PSD matrix. Eigenvalues in `[-1e-10·trace, 0)` are
/// clipped to zero; anything further below is rejected.
pub fn eigh_psd_matrix(m: &DMatrix<f64>) -> Result<Spectrum> {
    let eig = linalg::symmetric_eigen(m)?;
    let trace = m.trace();
    let tol = PSD_TOL * trace.max(0.0);
    let mut values = eig.values;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NotPsd { min_eigenvalue: *v, tolerance: tol });
            }
            *v = 0.0;
        }
    }
    Ok(Spectrum { values, vectors: eig.vectors, trace })
}

pub fn eigh_psd(g: &GramMatrix) -> Result<Spectrum> {
    eigh_psd_matrix(&g.values)
}

/// Spectrum of the empirical integral operator `T = G / n`.
pub fn empirical_operator(g: &GramMatrix) -> Result<Spectrum> {
    empirical_operator_matrix(&g.values)
}

pub fn empirical_operator_matrix(g: &DMatrix<f64>) -> Result<Spectrum> {
    let n = g.nrows() as f64;
    eigh_psd_matrix(&(g / n))
}

/// The swap involution of a swap-closed pair sample, with the projections
/// `S = ½(I + P)` and `A = ½(I − P)` derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionPair {
    perm: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMode {
    /// `S·G·S`
    Symmetric,
    /// `A·G·A`
    Antisymmetric,
    /// `½(G + P·G·P)`
    PermutationInvariant,
}

/// Builds the swap permutation: `perm[a]` is the position of `(j, i)` for pair `a = (i, j)`.
pub fn permutation_matrix(sample: &PairSample) -> Result<ProjectionPair> {
    let missing = sample.missing_swaps();
    if !missing.is_empty() {
        return Err(Error::NotSwapClosed { missing });
    }
    let index = sample.position_index();
    let perm = sample.pairs().iter().map(|&(i, j)| index[&(j, i)]).collect();
    Ok(ProjectionPair { perm })
}

impl ProjectionPair {
    /// Wraps an explicit permutation, which must be an involution.
    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        for (a, &b) in perm.iter().enumerate() {
            if b >= n || perm[b] != a {
                return Err(Error::InvalidArgument(format!("permutation is not an involution at {a}")));
            }
        }
        Ok(Self { perm })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |r, c| if self.perm[c] == r { 1.0 } else { 0.0 })
    }

    pub fn s_matrix(&self) -> DMatrix<f64> {
        (DMatrix::identity(self.len(), self.len()) + self.p_matrix()) * 0.5
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        (DMatrix::identity(self.len(), self.len()) - self.p_matrix()) * 0.5
    }

    /// `P·M·P` by index permutation.
    pub fn conjugate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |r, c| m[(self.perm[r], self.perm[c])])
    }

    /// `P·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&b| x[b]).collect()
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: n });
        }
        Ok(())
    }
}

/// Projects a Gram matrix with dense matrix products: `S·G·S`, `A·G·A` or `½(G + P·G·P)`.
pub fn project_gram(g: &DMatrix<f64>, proj: &ProjectionPair, mode: ProjectionMode) -> Result<DMatrix<f64>> {
    proj.check_size(g.nrows())?;
    if !g.is_square() {
        return Err(Error::DimensionMismatch { expected: g.nrows(), got: g.ncols() });
    }
    let out = match mode {
        ProjectionMode::Symmetric => {
            let s = proj.s_matrix();
            &s * g * &s
        }
        ProjectionMode::Antisymmetric => {
            let a = proj.a_matrix();
            &a * g * &a
        }
        ProjectionMode::PermutationInvariant => {
            let p = proj.p_matrix();
            (g + &p * g * &p) * 0.5
        }
    };
    Ok(symmetrize(out))
}

/// Averages with the transpose so downstream consumers see an exactly symmetric matrix.
fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// `Σ λᵢ / (λᵢ + reg)` over the given eigenvalues.
pub fn effective_dimension(values: &[f64], reg: f64) -> Result<f64> {
    if !(reg > 0.0) {
        return Err(Error::InvalidArgument(format!("regularization {reg} must be > 0")));
    }
    if let Some(v) = values.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("eigenvalue {v} must be non-negative")));
    }
    Ok(values.iter().map(|&l| l / (l + reg)).sum())
}

/// Effective dimension along an ascending grid of regularization values.
pub fn effdim_curve(values: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::Empty("regularization grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("regularization grid must be strictly ascending".into()));
    }
    grid.iter().map(|&r| Ok((r, effective_dimension(values, r)?))).collect()
}

/// Outcome of a numerical check: `passed == (margin >= -tolerance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest slack across the sub-assertions; negative means violated.
    pub margin: f64,
    pub tolerance: f64,
    pub context: Map<String, Value>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: margin >= -tolerance,
            margin,
            tolerance,
            context: Map::new(),
        }
    }

    /// Check asserting `residual <= tolerance`.
    pub fn residual(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self::new(name, -residual, tolerance)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }

    /// Merges sub-checks with differing tolerances. The merged margin is the
    /// smallest tolerance-inclusive slack, with tolerance 0, so it passes exactly
    /// when every part passes.
    pub fn combine(name: impl Into<String>, parts: Vec<CheckResult>) -> Self {
        let margin = parts
            .iter()
            .map(|p| p.margin + p.tolerance)
            .fold(f64::INFINITY, f64::min);
        let margin = if margin.is_finite() { margin } else { 0.0 };
        let mut out = Self::new(name, margin, 0.0);
        out.passed = parts.iter().all(|p| p.passed);
        let parts = parts.into_iter().map(|p| serde_json::to_value(p).expect("serializable")).collect();
        out.context.insert("parts".into(), Value::Array(parts));
        out
    }
}

fn pad(values: &[f64], n: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.resize(n, 0.0);
    v
}

fn sorted_desc(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Elementwise dominance of descending spectra: `projected[i] <= full[i] + tol`.
pub fn check_eigen_dominance(full: &[f64], projected: &[f64], tol: f64) -> CheckResult {
    let n = full.len().max(projected.len());
    let (f, p) = (pad(&sorted_desc(full), n), pad(&sorted_desc(projected), n));
    let margin = f.iter().zip(&p).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let margin = if margin.is_finite() { margin } else { 0.0 };
    CheckResult::new("eigen_dominance", margin, tol).with("len", n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    /// `Σᵏ s − Σᵏ r` for every prefix length `k`.
    pub partial_sum_margins: Vec<f64>,
    /// `Σ r − Σ s`.
    pub trace_gap: f64,
    pub majorized: bool,
    pub tolerance: f64,
}

impl MajorizationReport {
    pub fn min_margin(&self) -> f64 {
        self.partial_sum_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Tests `r ≺ s` (s majorizes r) on zero-padded descending sequences.
pub fn check_majorization(r: &[f64], s: &[f64], tol: f64) -> Result<MajorizationReport> {
    if let Some(x) = r.iter().chain(s).find(|&&x| x < -tol || x.is_nan()) {
        return Err(Error::InvalidArgument(format!("negative entry {x} in majorization input")));
    }
    let n = r.len().max(s.len());
    let (r, s) = (pad(&sorted_desc(r), n), pad(&sorted_desc(s), n));
    let mut margins = Vec::with_capacity(n);
    let (mut sr, mut ss) = (0.0, 0.0);
    for (a, b) in r.iter().zip(&s) {
        sr += a;
        ss += b;
        margins.push(ss - sr);
    }
    let trace_gap = sr - ss;
    let majorized = margins.iter().all(|&m| m >= -tol) && trace_gap.abs() <= tol;
    Ok(MajorizationReport { partial_sum_margins: margins, trace_gap, majorized, tolerance: tol })
}

/// Checks that `{S, A, G^S, G^A, G^PI}` behave as a commuting family.
///
/// The identities `S·A = 0`, `G^S·G^A = G^A·G^S = 0` and `G^PI = G^S + G^A`
/// are held to `identity_tol · max(1, max|G|)`. The spectrum of `G^PI` must
/// equal the union of the spectra of `G^S` and `G^A` with the structurally
/// zero eigenvalues removed, within `spectral_tol · trace(G)`. That comparison
/// sorts the merged spectra and keeps the top `n`, so no thresholding of
/// "zero" eigenvalues is needed and clustered eigenvalues cause no ambiguity.
pub fn check_commuting_family(
    g: &DMatrix<f64>,
    proj: &ProjectionPair,
    identity_tol: f64,
    spectral_tol: f64,
) -> Result<CheckResult> {
    let n = g.nrows();
    proj.check_size(n)?;
    let trace = g.trace();

    let s = proj.s_matrix();
    let a = proj.a_matrix();
    let gs = project_gram(g, proj, ProjectionMode::Symmetric)?;
    let ga = project_gram(g, proj, ProjectionMode::Antisymmetric)?;
    let gpi = project_gram(g, proj, ProjectionMode::PermutationInvariant)?;
    let zero = DMatrix::zeros(n, n);

    let sa = max_abs_diff(&(&s * &a), &zero);
    let cross = max_abs_diff(&(&gs * &ga), &zero).max(max_abs_diff(&(&ga * &gs), &zero));
    let sum = max_abs_diff(&gpi, &(&gs + &ga));

    let pi_values = eigh_psd_matrix(&gpi)?.values;
    let mut merged = eigh_psd_matrix(&gs)?.values;
    merged.extend(eigh_psd_matrix(&ga)?.values);
    let merged = sorted_desc(&merged);
    let spectral = pi_values
        .iter()
        .zip(&merged)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    let identity_residual = sa.max(cross).max(sum);
    let identities = CheckResult::residual("identities", identity_residual, identity_tol * g.amax().max(1.0));
    let spectrum = CheckResult::residual("spectrum_union", spectral, spectral_tol * trace.max(0.0));
    Ok(CheckResult::combine("commuting_family", vec![identities, spectrum])
        .with("projection_product", sa)
        .with("cross_product", cross)
        .with("sum_identity", sum)
        .with("identity_residual", identity_residual)
        .with("spectral_residual", spectral)
        .with("trace", trace))
}

/// A unital channel in Kraus form with unitary-mixing terms: `Γ(T) = Σ wᵢ·Uᵢ·T·Uᵢᵀ`,
/// where each Kraus operator is `√wᵢ·Uᵢ` for a permutation `Uᵢ`.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    terms: Vec<(f64, Vec<usize>)>,
}

impl KrausChannel {
    /// The swap channel `Γ(T) = ½(T + P·T·P)` with Kraus operators `{I/√2, P/√2}`.
    pub fn swap(proj: &ProjectionPair) -> Self {
        let identity = (0..proj.len()).collect();
        Self { terms: vec![(0.5, identity), (0.5, proj.perm().to_vec())] }
    }

    /// `Σ wᵢ` (completeness of the Kraus set: `Σ KᵢᵀKᵢ = (Σ wᵢ)·I`).
    pub fn completeness(&self) -> f64 {
        self.terms.iter().map(|t| t.0).sum()
    }

    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (w, perm) in &self.terms {
            // (U·M·Uᵀ)[r, c] = M[π⁻¹(r), π⁻¹(c)]
            let mut inv = vec![0; perm.len()];
            for (a, &b) in perm.iter().enumerate() {
                inv[b] = a;
            }
            for c in 0..n {
                for r in 0..n {
                    out[(r, c)] += w * m[(inv[r], inv[c])];
                }
            }
        }
        out
    }
}

/// Applies the swap channel to `G` and checks trace preservation, unitality
/// and agreement with the permutation-invariant projection.
pub fn kraus_channel(g: &DMatrix<f64>, proj: &ProjectionPair) -> Result<(DMatrix<f64>, CheckResult)> {
    let n = g.nrows();
    proj.check_size(n)?;
    let channel = KrausChannel::swap(proj);
    let out = channel.apply(g);

    let trace = g.trace();
    let trace_gap = (out.trace() - trace).abs() / trace.abs().max(f64::MIN_POSITIVE);
    let identity = DMatrix::<f64>::identity(n, n);
    let unital = channel.apply(&identity) == identity;
    let pi = project_gram(g, proj, ProjectionMode::PermutationInvariant)?;
    let scale = g.amax().max(1.0);
    let projection_gap = max_abs_diff(&out, &pi) / scale;

    let trace_check = CheckResult::residual("trace_preserved", trace_gap, 1e-10);
    let unital_check = CheckResult::new("unital", if unital { 0.0 } else { -1.0 }, 0.0);
    let pi_check = CheckResult::residual("matches_projection", projection_gap, 1e-12);
    let check = CheckResult::combine("kraus_channel", vec![trace_check, unital_check, pi_check])
        .with("completeness", channel.completeness());
    Ok((out, check))
}

/// Effective-dimension ordering `N(smaller, λ) <= N(larger, λ) + tol` over a grid.
pub fn check_effdim_order(
    name: &str,
    smaller: &[f64],
    larger: &[f64],
    grid: &[f64],
    tol: f64,
) -> Result<CheckResult> {
    let mut margin = f64::INFINITY;
    for &reg in grid {
        let gap = effective_dimension(larger, reg)? - effective_dimension(smaller, reg)?;
        margin = margin.min(gap);
    }
    if !margin.is_finite() {
        return Err(Error::Empty("regularization grid"));
    }
    Ok(CheckResult::new(name, margin, tol).with("grid_len", grid.len()))
}
