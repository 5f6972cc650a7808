//! Seeded synthetic data and the randomized verification suite.
//!
//! All randomness comes from ChaCha8 streams. Per-trial seeds are derived from
//! the master seed with a SplitMix64 mix, so every trial reproduces on its own
//! and results do not depend on scheduling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kernel::{build_gram, normalize_pairwise, BaseKernel, Construction, KernelSpec, PairSample, PointSet, Transform};
use crate::regression::{
    approximation_decay, bias_bound_check, bias_equality_check, empirical_sq_norm, regularization_bias,
    regularized_smoother, DecayConfig, DecayPoint, Symmetry, TargetFunction, TransformSpectra,
};
use crate::spectral::{
    check_commuting_family, check_eigen_dominance, check_effdim_order, check_majorization, eigh_psd_matrix,
    effective_dimension, empirical_operator, kraus_channel, permutation_matrix, project_gram, CheckResult,
    ProjectionMode, Spectrum,
};
use crate::linalg::max_abs_diff;

/// Largest `n_v` for which the suite uses every ordered pair.
pub const EXHAUSTIVE_LIMIT: usize = 12;
/// Unordered pairs drawn for larger point sets (before adding swaps).
pub const RANDOM_PAIRS: usize = 32;

/// Check names in report order.
pub const CHECK_NAMES: [&str; 11] = [
    "gram_identity",
    "eigen_dominance",
    "commuting_family",
    "kraus_channel",
    "majorization",
    "effdim_sequence",
    "effdim_inequalities",
    "bias_consistency",
    "bias_equality",
    "bias_bounds",
    "approximation_decay",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 mix of `(seed, stream)` into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` points drawn uniformly from `[0,1]^d`.
pub fn gen_points(n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
    }
    let mut r = rng(seed);
    let coords = (0..n * d).map(|_| r.random::<f64>()).collect();
    PointSet::from_flat(d, coords)
}

/// Swap-closed, unlabeled pair sample over `n_v` points: every ordered pair
/// (diagonal included) up to [`EXHAUSTIVE_LIMIT`] points, otherwise
/// [`RANDOM_PAIRS`] random off-diagonal pairs together with their swaps.
pub fn sample_pairs(n_v: usize, seed: u64) -> Result<PairSample> {
    if n_v == 0 {
        return Err(Error::Empty("point set"));
    }
    if n_v <= EXHAUSTIVE_LIMIT {
        return Ok(PairSample::all_ordered(n_v));
    }
    let unordered = n_v * (n_v - 1) / 2;
    let take = RANDOM_PAIRS.min(unordered);
    let mut chosen = index::sample(&mut rng(seed), unordered, take).into_vec();
    chosen.sort_unstable();
    let mut pairs = Vec::with_capacity(2 * take);
    for k in chosen {
        let (i, j) = unordered_pair(k, n_v);
        pairs.push((i, j));
        pairs.push((j, i));
    }
    PairSample::unlabeled(pairs)
}

/// The `k`-th pair `(i, j)`, `i < j`, in row-major order over `n` points.
fn unordered_pair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Symmetric,
    Antisymmetric,
    Ranking,
    Generic,
}

impl TargetKind {
    pub fn symmetry(self) -> Symmetry {
        match self {
            TargetKind::Symmetric => Symmetry::Symmetric,
            TargetKind::Antisymmetric | TargetKind::Ranking => Symmetry::Antisymmetric,
            TargetKind::Generic => Symmetry::Generic,
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "antisymmetric" => Ok(Self::Antisymmetric),
            "ranking" => Ok(Self::Ranking),
            "generic" => Ok(Self::Generic),
            other => Err(Error::Parse(format!("unknown target kind `{other}`"))),
        }
    }
}

const TERMS: usize = 3;

/// `Σ a_k sin(π ω_k·v + φ_k) + c·|v|²/d`.
#[derive(Debug, Clone)]
struct Wave {
    amp: [f64; TERMS],
    freq: Vec<[f64; TERMS]>,
    phase: [f64; TERMS],
    quad: f64,
}

impl Wave {
    fn new(d: usize, r: &mut ChaCha8Rng) -> Self {
        let mut amp = [0.0; TERMS];
        let mut phase = [0.0; TERMS];
        for k in 0..TERMS {
            amp[k] = r.random_range(-1.0..1.0);
            phase[k] = r.random_range(0.0..2.0 * PI);
        }
        let freq = (0..d)
            .map(|_| {
                let mut f = [0.0; TERMS];
                f.iter_mut().for_each(|x| *x = r.random_range(0.0..2.0));
                f
            })
            .collect();
        Self { amp, freq, phase, quad: r.random_range(-1.0..1.0) }
    }

    fn dot(&self, k: usize, v: &[f64]) -> f64 {
        v.iter().zip(&self.freq).map(|(x, f)| x * f[k]).sum()
    }

    fn eval(&self, v: &[f64]) -> f64 {
        let waves: f64 = (0..TERMS).map(|k| self.amp[k] * (PI * self.dot(k, v) + self.phase[k]).sin()).sum();
        waves + self.quad * v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
    }

    /// Two-argument variant using separate frequency rows for each argument.
    fn eval2(&self, other: &Wave, v: &[f64], w: &[f64]) -> f64 {
        let waves: f64 = (0..TERMS)
            .map(|k| self.amp[k] * (PI * (self.dot(k, v) + other.dot(k, w)) + self.phase[k]).sin())
            .sum();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        waves + self.quad * mean(v) * mean(w)
    }
}

/// A smooth random function of a pair of points whose declared symmetry holds
/// exactly in floating point.
#[derive(Debug, Clone)]
pub struct SmoothTarget {
    kind: TargetKind,
    dim: usize,
    first: Wave,
    second: Wave,
}

impl SmoothTarget {
    pub fn new(kind: TargetKind, dim: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let first = Wave::new(dim, &mut r);
        let second = Wave::new(dim, &mut r);
        Self { kind, dim, first, second }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, v: &[f64], w: &[f64]) -> f64 {
        match self.kind {
            // Each summand is exactly commutative, so the sum is too.
            TargetKind::Symmetric => {
                self.first.eval(v) * self.first.eval(w) + (self.second.eval(v) + self.second.eval(w))
            }
            TargetKind::Antisymmetric => self.q(v, w) - self.q(w, v),
            TargetKind::Ranking => self.first.eval(v) - self.first.eval(w),
            TargetKind::Generic => self.q(v, w),
        }
    }

    fn q(&self, v: &[f64], w: &[f64]) -> f64 {
        self.first.eval2(&self.second, v, w)
    }
}

/// Tabulates a seeded smooth target of the given kind on the sample's pairs.
pub fn gen_target(kind: TargetKind, points: &PointSet, sample: &PairSample, seed: u64) -> Result<TargetFunction> {
    sample.check_indices(points.len())?;
    let t = SmoothTarget::new(kind, points.dim(), seed);
    let values = sample.pairs().iter().map(|&(i, j)| t.eval(points.point(i), points.point(j))).collect();
    Ok(TargetFunction::new(values, kind.symmetry()))
}

/// Settings of the once-per-run approximation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationConfig {
    pub enabled: bool,
    pub gamma: f64,
    pub sizes: Vec<usize>,
    pub decay: DecayConfig,
}

impl Default for ApproximationConfig {
    fn default() -> Self {
        Self { enabled: true, gamma: 20.0, sizes: vec![25, 50, 100, 200], decay: DecayConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub specs: Vec<KernelSpec>,
    /// Multiply gaussian bandwidths by a per-trial factor in `[½, 2]`.
    pub jitter_gamma: bool,
    pub reg_grid: Vec<f64>,
    pub bias_reg_grid: Vec<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub approximation: ApproximationConfig,
    /// Added to `G[0][0]` before the Gram identity check; 0 disables.
    pub gram_fault: f64,
}

pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("gram_identity", 1e-10),
        ("eigen_dominance", 1e-9),
        ("commuting_family", 1e-10),
        ("commuting_spectrum", 1e-8),
        ("kraus_channel", 1e-10),
        ("majorization", 1e-8),
        ("effdim_sequence", 1e-9),
        ("effdim_inequalities", 1e-9),
        ("bias_consistency", 1e-10),
        ("bias_equality", 1e-9),
        ("bias_bounds", 1e-10),
        ("approximation_decay", 0.5),
        ("approximation_ratio", 1.05),
        ("approximation_swap", 1e-10),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Regularization values of the smoother consistency check.
pub const CONSISTENCY_REGS: [f64; 3] = [1e-3, 1.0, 1e3];

impl Default for SuiteConfig {
    fn default() -> Self {
        let gauss = BaseKernel::Gaussian { gamma: 1.0 };
        Self {
            master_seed: 42,
            trials: 5,
            sizes: vec![4, 6, 8],
            dims: vec![1, 2],
            specs: vec![
                KernelSpec::gaussian_kronecker(1.0),
                KernelSpec { base: gauss, construction: Construction::Pointwise, transform: Transform::None, scale: 1.0 },
                KernelSpec {
                    base: BaseKernel::Polynomial { degree: 2, offset: 1.0 },
                    construction: Construction::Kronecker,
                    transform: Transform::None,
                    scale: 1.0,
                },
            ],
            jitter_gamma: true,
            reg_grid: vec![1e-6, 1e-4, 1e-2, 1.0, 1e2],
            bias_reg_grid: vec![0.01, 0.1, 1.0, 10.0],
            tolerances: default_tolerances(),
            approximation: ApproximationConfig::default(),
            gram_fault: 0.0,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.sizes.is_empty() || self.dims.is_empty() || self.specs.is_empty() {
            return fail("sizes, dims and specs must be non-empty");
        }
        if self.sizes.contains(&0) || self.dims.contains(&0) {
            return fail("sizes and dims must be positive");
        }
        for grid in [&self.reg_grid, &self.bias_reg_grid] {
            if grid.is_empty() || grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return fail("regularization grids must be non-empty and positive");
            }
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        let known = default_tolerances();
        for (k, &v) in &self.tolerances {
            if !known.contains_key(k) {
                return Err(Error::Config(format!("unknown tolerance `{k}`")));
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance `{k}` must be finite and >= 0")));
            }
        }
        if !self.gram_fault.is_finite() {
            return fail("gram fault must be finite");
        }
        if self.approximation.enabled && self.approximation.sizes.len() < 2 {
            return fail("approximation needs at least two sizes");
        }
        Ok(())
    }

    /// Tolerance by name, falling back to the default.
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| default_tolerances()[name])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
    pub config_echo: SuiteConfig,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// One (trial, size, dimension, spec) combination.
#[derive(Debug, Clone, Copy)]
struct Case {
    trial: usize,
    n_v: usize,
    dim: usize,
    spec_index: usize,
    seed: u64,
}

impl Case {
    fn label(&self) -> Value {
        json!({ "trial": self.trial, "n_v": self.n_v, "dim": self.dim, "spec": self.spec_index })
    }
}

fn cases(cfg: &SuiteConfig) -> Vec<Case> {
    let mut out = Vec::new();
    for trial in 0..cfg.trials {
        let trial_seed = derive_seed(cfg.master_seed, trial as u64);
        for &n_v in &cfg.sizes {
            for &dim in &cfg.dims {
                for spec_index in 0..cfg.specs.len() {
                    let seed = derive_seed(derive_seed(derive_seed(trial_seed, n_v as u64), dim as u64), spec_index as u64);
                    out.push(Case { trial, n_v, dim, spec_index, seed });
                }
            }
        }
    }
    out
}

/// Runs every check over all trials and aggregates one result per check name.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let per_case: Vec<Vec<CheckResult>> = cases(cfg)
        .par_iter()
        .map(|case| {
            run_case(cfg, case).map_err(|e| e.context(format!("suite case {}", case.label())))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<Value> = cases(cfg).iter().map(Case::label).collect();

    let mut checks = Vec::new();
    for name in CHECK_NAMES.iter().take(CHECK_NAMES.len() - 1) {
        let results: Vec<(&Value, &CheckResult)> = labels
            .iter()
            .zip(&per_case)
            .flat_map(|(l, rs)| rs.iter().filter(|r| r.name == *name).map(move |r| (l, r)))
            .collect();
        checks.push(aggregate(name, &results));
    }
    if cfg.approximation.enabled {
        checks.push(
            approximation_check(cfg)
                .map_err(|e| e.context("approximation_decay"))?,
        );
    }

    let passed = checks.iter().filter(|c| c.passed).count();
    Ok(VerificationReport {
        summary: Summary { total: checks.len(), passed, failed: checks.len() - passed },
        checks,
        config_echo: cfg.clone(),
    })
}

/// Worst case decides the reported margin; every failing case is listed.
fn aggregate(name: &str, results: &[(&Value, &CheckResult)]) -> CheckResult {
    let worst = results
        .iter()
        .min_by(|a, b| (a.1.margin + a.1.tolerance).total_cmp(&(b.1.margin + b.1.tolerance)))
        .expect("every case yields every check");
    let failing: Vec<Value> = results.iter().filter(|r| !r.1.passed).map(|r| r.0.clone()).collect();
    let mut out = CheckResult::new(name, worst.1.margin, worst.1.tolerance);
    out.passed = failing.is_empty();
    out.context.insert("cases".into(), results.len().into());
    out.context.insert("failed_cases".into(), failing.len().into());
    out.context.insert("worst_case".into(), worst.0.clone());
    out.context.insert("worst_detail".into(), Value::Object(worst.1.context.clone()));
    if !failing.is_empty() {
        out.context.insert("failing".into(), Value::Array(failing.into_iter().take(20).collect()));
    }
    out
}

fn case_spec(cfg: &SuiteConfig, case: &Case) -> KernelSpec {
    let mut spec = cfg.specs[case.spec_index].with_transform(Transform::None);
    if cfg.jitter_gamma {
        if let BaseKernel::Gaussian { gamma } = spec.base {
            let factor = rng(derive_seed(case.seed, 3)).random_range(-1.0f64..1.0).exp2();
            spec.base = BaseKernel::Gaussian { gamma: gamma * factor };
        }
    }
    spec
}

fn run_case(cfg: &SuiteConfig, case: &Case) -> Result<Vec<CheckResult>> {
    let points = gen_points(case.n_v, case.dim, derive_seed(case.seed, 0))?;
    let sample = sample_pairs(case.n_v, derive_seed(case.seed, 1))?;
    let proj = permutation_matrix(&sample)?;
    let spec = normalize_pairwise(&case_spec(cfg, case), &points, &sample)?;
    let n = sample.len() as f64;

    let g = build_gram(&spec, &points, &sample)?;
    let grams = [Transform::Symmetric, Transform::Antisymmetric, Transform::PermutationInvariant]
        .map(|t| build_gram(&spec.with_transform(t), &points, &sample));
    let [g_s, g_a, g_pi] = grams;
    let (g_s, g_a, g_pi) = (g_s?, g_a?, g_pi?);
    let mut out = Vec::with_capacity(CHECK_NAMES.len());

    // Projections of the Gram matrix against the transformed kernels' Gram matrices.
    let mut g_checked = g.values.clone();
    g_checked[(0, 0)] += cfg.gram_fault;
    let mut gaps = Map::new();
    let mut worst = 0.0f64;
    for (mode, direct, key) in [
        (ProjectionMode::Symmetric, &g_s, "symmetric"),
        (ProjectionMode::Antisymmetric, &g_a, "antisymmetric"),
        (ProjectionMode::PermutationInvariant, &g_pi, "permutation_invariant"),
    ] {
        let gap = max_abs_diff(&project_gram(&g_checked, &proj, mode)?, &direct.values);
        gaps.insert(key.into(), gap.into());
        worst = worst.max(gap);
    }
    let mut c = CheckResult::residual("gram_identity", worst, cfg.tol("gram_identity"));
    c.context = gaps;
    out.push(c);

    let t_full = empirical_operator(&g)?;
    let t_s = empirical_operator(&g_s)?;
    let t_a = empirical_operator(&g_a)?;
    let t_pi = empirical_operator(&g_pi)?;

    let tol = cfg.tol("eigen_dominance");
    let dominance = CheckResult::combine(
        "eigen_dominance",
        vec![
            check_eigen_dominance(&t_full.values, &t_s.values, tol).with("projection", "symmetric"),
            check_eigen_dominance(&t_full.values, &t_a.values, tol).with("projection", "antisymmetric"),
        ],
    );
    out.push(dominance);

    out.push(check_commuting_family(&g.values, &proj, cfg.tol("commuting_family"), cfg.tol("commuting_spectrum"))?);

    let (channel_out, channel) = kraus_channel(&g.values, &proj)?;
    out.push(channel);

    let trace = g.trace();
    let tol = cfg.tol("majorization") * trace;
    let g_values: Vec<f64> = t_full.values.iter().map(|x| x * n).collect();
    let report = check_majorization(&eigh_psd_matrix(&channel_out)?.values, &g_values, tol)?;
    out.push(
        CheckResult::new("majorization", report.min_margin().min(-report.trace_gap.abs()), tol)
            .with("trace_gap", report.trace_gap)
            .with("trace", trace),
    );

    out.push(effdim_sequence(&t_pi, &t_full, &cfg.reg_grid, cfg.tol("effdim_sequence"))?);

    let tol = cfg.tol("effdim_inequalities");
    let grid = &cfg.reg_grid;
    out.push(CheckResult::combine(
        "effdim_inequalities",
        vec![
            check_effdim_order("symmetric_below_full", &t_s.values, &t_full.values, grid, tol)?,
            check_effdim_order("antisymmetric_below_full", &t_a.values, &t_full.values, grid, tol)?,
            check_effdim_order("full_below_invariant", &t_full.values, &t_pi.values, grid, tol)?,
        ],
    ));

    let sym = gen_target(TargetKind::Symmetric, &points, &sample, derive_seed(case.seed, 2))?;
    let anti = gen_target(TargetKind::Antisymmetric, &points, &sample, derive_seed(case.seed, 4))?;
    sym.validate(&proj)?;
    anti.validate(&proj)?;

    let tol = cfg.tol("bias_consistency");
    let mut worst_rel = 0.0f64;
    for t in [&t_full, &t_pi] {
        for f in [&sym.values, &anti.values] {
            for &reg in CONSISTENCY_REGS.iter().chain(&cfg.bias_reg_grid) {
                worst_rel = worst_rel.max(consistency_gap(t, f, reg)?);
            }
        }
    }
    out.push(CheckResult::residual("bias_consistency", worst_rel, tol));

    let spectra = TransformSpectra { spec, full: t_full, pi: t_pi, s: t_s, a: t_a };
    let mut equality = Vec::new();
    let mut bounds = Vec::new();
    for target in [&sym, &anti] {
        for &reg in &cfg.bias_reg_grid {
            let r = spectra.report(target, reg)?;
            let matched = if target.symmetry == Symmetry::Symmetric { r.bias_s } else { r.bias_a };
            equality.push(
                bias_equality_check(r.bias_pi, matched, cfg.tol("bias_equality"))
                    .with("reg", reg)
                    .with("target", format!("{:?}", target.symmetry)),
            );
            bounds.push(
                bias_bound_check(r.bias_full, r.bias_pi, reg, cfg.tol("bias_bounds") * r.bias_full)
                    .with("target", format!("{:?}", target.symmetry)),
            );
        }
    }
    out.push(CheckResult::combine("bias_equality", equality));
    out.push(CheckResult::combine("bias_bounds", bounds));
    Ok(out)
}

/// Relative gap between the closed-form bias and the smoother residual.
pub fn consistency_gap(t: &Spectrum, f: &[f64], reg: f64) -> Result<f64> {
    let bias = regularization_bias(t, f, reg)?;
    let smooth = regularized_smoother(t, f, reg)?;
    let resid: Vec<f64> = f.iter().zip(&smooth).map(|(a, b)| a - b).collect();
    let direct = empirical_sq_norm(&resid);
    Ok((bias - direct).abs() / bias.max(1e-300))
}

/// The spectrum of `T^PI` is majorized by that of `T` and so has the larger
/// effective dimension at every regularization value.
fn effdim_sequence(pi: &Spectrum, full: &Spectrum, grid: &[f64], tol: f64) -> Result<CheckResult> {
    let trace = full.trace;
    let maj = check_majorization(&pi.values, &full.values, 1e-8 * trace.max(0.0))?;
    let maj_check = CheckResult::new("majorized", maj.min_margin().min(-maj.trace_gap.abs()), maj.tolerance);
    let mut margin = f64::INFINITY;
    for &reg in grid {
        margin = margin.min(effective_dimension(&pi.values, reg)? - effective_dimension(&full.values, reg)?);
    }
    let order = CheckResult::new("effdim_not_smaller", margin, tol);
    Ok(CheckResult::combine("effdim_sequence", vec![maj_check, order]))
}

fn approximation_check(cfg: &SuiteConfig) -> Result<CheckResult> {
    let a = &cfg.approximation;
    let spec = KernelSpec::transitive(BaseKernel::Gaussian { gamma: a.gamma });
    let curve = approximation_decay(&spec, TargetKind::Ranking, &a.sizes, cfg.master_seed, &a.decay)?;
    Ok(decay_check(&curve, cfg.tol("approximation_decay"), cfg.tol("approximation_ratio"), cfg.tol("approximation_swap")))
}

/// Final error below `threshold`, no worse than `ratio` times the previous
/// size, and all fitted predictions swap anti-symmetric.
pub fn decay_check(curve: &[DecayPoint], threshold: f64, ratio: f64, swap_tol: f64) -> CheckResult {
    let last = curve.last().expect("non-empty curve");
    let mut parts = vec![CheckResult::residual("final_error", last.sup_error, threshold)];
    if curve.len() >= 2 {
        let prev = &curve[curve.len() - 2];
        parts.push(CheckResult::new("no_regression", ratio * prev.sup_error - last.sup_error, 0.0));
    }
    let swap = curve.iter().map(|p| p.swap_residual).fold(0.0, f64::max);
    parts.push(CheckResult::residual("swap_antisymmetry", swap, swap_tol));
    let errors: Vec<Value> = curve.iter().map(|p| json!([p.n, p.sup_error])).collect();
    CheckResult::combine("approximation_decay", parts).with("curve", errors)
}
