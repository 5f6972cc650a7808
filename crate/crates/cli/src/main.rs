use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pairspec::config::{load_kernel_spec, load_suite_config, parse_list};
use pairspec::kernel::{
    build_gram, close_under_swap, normalize_pairwise, KernelSpec, PairSample, PointSet, SwapMode, Transform,
};
use pairspec::regression::{bias_reports, krr_fit, krr_predict, RegularizedSolution, Symmetry, TargetFunction};
use pairspec::spectral::{effdim_curve, eigh_psd, empirical_operator, permutation_matrix};
use pairspec::testbed::{gen_points, gen_target, run_suite, sample_pairs, SuiteConfig, TargetKind};
use pairspec::{io, Error};

const SEED_ENV: &str = "PAIRSPEC_SEED";

#[derive(Parser)]
#[command(name = "pairspec", version, about = "Pairwise kernels, their symmetry transforms and spectra")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gram matrix of a kernel over a pair sample.
    Gram(GramArgs),
    /// Eigenvalues of a Gram matrix.
    Spectrum(SpectrumArgs),
    /// Effective dimension over a regularization grid.
    Effdim(EffdimArgs),
    /// Kernel ridge regression coefficients.
    Fit(FitArgs),
    /// Predictions from fitted coefficients.
    Predict(PredictArgs),
    /// Regularization bias of a kernel and its transforms.
    Bias(BiasArgs),
    /// Run the randomized verification suite.
    Verify(VerifyArgs),
    /// Generate synthetic data, or close a pair sample under swaps.
    Gen(GenArgs),
}

#[derive(Args)]
struct KernelInput {
    /// Kernel config file (`key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Points CSV.
    #[arg(long)]
    points: PathBuf,
    /// Rescale the kernel so its largest diagonal value over the sample is 1.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct GramArgs {
    #[command(flatten)]
    kernel: KernelInput,
    /// Pairs CSV (`i,j[,y]`).
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Gram matrix CSV.
    #[arg(long)]
    gram: PathBuf,
    /// Eigenvalues of the empirical operator G/n instead of G.
    #[arg(long)]
    empirical: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EffdimArgs {
    /// Spectrum CSV (`index,eigenvalue`).
    #[arg(long)]
    spectrum: PathBuf,
    /// Comma separated regularization values.
    #[arg(long, value_name = "LIST")]
    lambda: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    kernel: KernelInput,
    /// Labeled pairs CSV (`i,j,y`).
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Coefficients CSV (`alpha`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    kernel: KernelInput,
    /// Training pairs CSV the coefficients were fitted on.
    #[arg(long)]
    train: PathBuf,
    /// Coefficients CSV from `fit`.
    #[arg(long)]
    coefficients: PathBuf,
    /// Pairs CSV to predict at.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BiasArgs {
    /// Kernel config; the transform is ignored and all four are evaluated.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    points: PathBuf,
    /// Labeled, swap-closed pairs CSV.
    #[arg(long)]
    pairs: PathBuf,
    /// Comma separated regularization values.
    #[arg(long, value_name = "LIST", default_value = "0.01,0.1,1,10")]
    lambda: String,
    /// Symmetry of the labels; inferred from the sample when omitted.
    #[arg(long, value_enum)]
    symmetry: Option<LabelSymmetry>,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Add DELTA to one Gram entry before the Gram identity check.
    #[arg(long, value_name = "DELTA")]
    inject_gram_fault: Option<f64>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Pairs CSV to close under swaps (virtual examples) instead of generating data.
    #[arg(long, value_name = "PAIRS", conflicts_with_all = ["n_points", "out_dir"])]
    close_swaps: Option<PathBuf>,
    /// How labels of added swapped pairs are derived.
    #[arg(long, value_enum, default_value = "symmetric", requires = "close_swaps")]
    mode: CloseMode,
    /// Output pairs CSV for `--close-swaps`.
    #[arg(long, requires = "close_swaps")]
    out: Option<PathBuf>,

    /// Number of points to generate.
    #[arg(long, required_unless_present = "close_swaps")]
    n_points: Option<usize>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "ranking")]
    target: Kind,
    /// Directory receiving points.csv, pairs.csv and targets.csv.
    #[arg(long, required_unless_present = "close_swaps")]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelSymmetry {
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloseMode {
    Symmetric,
    Antisymmetric,
    Unlabeled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Symmetric,
    Antisymmetric,
    Ranking,
    Generic,
}

/// Failure of a verification check, as opposed to an infrastructure error.
struct ChecksFailed;

enum Failure {
    Checks(ChecksFailed),
    Infra(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Infra(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { quiet: cli.quiet };
    let result = match cli.command {
        Command::Gram(a) => gram(&ctx, a),
        Command::Spectrum(a) => spectrum(&ctx, a),
        Command::Effdim(a) => effdim(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Bias(a) => bias(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Gen(a) => gen(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(ChecksFailed)) => ExitCode::from(1),
        Err(Failure::Infra(e)) => {
            eprintln!("error: {e}");
            if matches!(e.root(), Error::NotSwapClosed { .. }) {
                eprintln!("hint: run `pairspec gen --close-swaps <pairs.csv> --out <closed.csv>` to add virtual examples");
            }
            ExitCode::from(3)
        }
    }
}

fn seed_override() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn lambdas(list: &str) -> Result<Vec<f64>, Error> {
    parse_list("lambda", list)
}

/// Loads the kernel and points; with `--normalize` the scale is fitted on `sample`.
fn load_kernel(input: &KernelInput, sample: &PairSample) -> Result<(KernelSpec, PointSet), Error> {
    let spec = load_kernel_spec(&input.config)?;
    let points = io::read_points(&input.points)?;
    let spec = if input.normalize { normalized(&spec, &points, sample)? } else { spec };
    Ok((spec, points))
}

fn normalized(spec: &KernelSpec, points: &PointSet, sample: &PairSample) -> Result<KernelSpec, Error> {
    let unit = normalize_pairwise(&spec.with_transform(Transform::None), points, sample)?;
    Ok(unit.with_transform(spec.transform))
}

fn gram(ctx: &Ctx, a: GramArgs) -> Outcome {
    let sample = io::read_pairs(&a.pairs)?;
    let (spec, points) = load_kernel(&a.kernel, &sample)?;
    let g = build_gram(&spec, &points, &sample)?;
    io::write_gram(&a.out, &g)?;
    ctx.note(format!("wrote {} ({n}x{n}, {})", a.out.display(), spec, n = g.len()));
    Ok(())
}

fn spectrum(ctx: &Ctx, a: SpectrumArgs) -> Outcome {
    let g = io::read_gram(&a.gram)?;
    let s = if a.empirical { empirical_operator(&g)? } else { eigh_psd(&g)? };
    io::write_spectrum(&a.out, &s.values)?;
    ctx.note(format!("wrote {} ({} eigenvalues, trace {})", a.out.display(), s.len(), s.trace));
    Ok(())
}

fn effdim(ctx: &Ctx, a: EffdimArgs) -> Outcome {
    let values = io::read_spectrum(&a.spectrum)?;
    let curve = effdim_curve(&values, &lambdas(&a.lambda)?)?;
    io::write_curve(&a.out, &curve)?;
    ctx.note(format!("wrote {} ({} points)", a.out.display(), curve.len()));
    Ok(())
}

fn fit(ctx: &Ctx, a: FitArgs) -> Outcome {
    let sample = io::read_pairs(&a.pairs)?;
    let y = sample
        .labels()
        .ok_or_else(|| Error::InvalidSample(format!("{} has no `y` column", a.pairs.display())))?
        .to_vec();
    let (spec, points) = load_kernel(&a.kernel, &sample)?;
    let g = build_gram(&spec, &points, &sample)?;
    let sol = krr_fit(&g, &y, a.lambda)?;
    io::write_coefficients(&a.out, &sol.coefficients)?;
    ctx.note(format!("wrote {} ({} coefficients, lambda {})", a.out.display(), sol.coefficients.len(), a.lambda));
    Ok(())
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Outcome {
    let train = io::read_pairs(&a.train)?;
    let test = io::read_pairs(&a.test)?;
    let (spec, points) = load_kernel(&a.kernel, &train)?;
    let sol = RegularizedSolution {
        coefficients: io::read_coefficients(&a.coefficients)?,
        reg: f64::NAN,
        spec_id: spec.id(),
        sample_id: train.fingerprint(),
    };
    let values = krr_predict(&spec, &points, &train, &sol, &test)?;
    io::write_predictions(&a.out, &test, &values)?;
    ctx.note(format!("wrote {} ({} predictions)", a.out.display(), values.len()));
    Ok(())
}

fn bias(ctx: &Ctx, a: BiasArgs) -> Outcome {
    let spec = load_kernel_spec(&a.config)?;
    let points = io::read_points(&a.points)?;
    let sample = io::read_pairs(&a.pairs)?;
    let labels = sample
        .labels()
        .ok_or_else(|| Error::InvalidSample(format!("{} has no `y` column", a.pairs.display())))?
        .to_vec();
    let proj = permutation_matrix(&sample)?;
    let symmetry = match a.symmetry {
        Some(LabelSymmetry::Symmetric) => Symmetry::Symmetric,
        Some(LabelSymmetry::Antisymmetric) => Symmetry::Antisymmetric,
        None => [Symmetry::Symmetric, Symmetry::Antisymmetric]
            .into_iter()
            .find(|&s| TargetFunction::new(labels.clone(), s).validate(&proj).is_ok())
            .ok_or_else(|| Error::InvalidSample("labels are neither symmetric nor anti-symmetric under swaps".into()))?,
    };
    let target = TargetFunction::new(labels, symmetry);
    let reports = bias_reports(&spec, &points, &sample, &target, &lambdas(&a.lambda)?)?;
    let ok = reports.iter().all(|r| r.bounds_hold && r.equality_holds);
    let body = json!({
        "spec": spec.with_transform(Transform::None).id(),
        "sample": sample.fingerprint(),
        "symmetry": symmetry,
        "reports": reports,
    });
    emit_json(ctx, a.out.as_deref(), &body)?;
    ctx.note(format!("{} regularization values, bounds and equality {}", reports.len(), if ok { "hold" } else { "VIOLATED" }));
    Ok(())
}

fn emit_json(ctx: &Ctx, out: Option<&Path>, body: &serde_json::Value) -> Result<(), Error> {
    match out {
        Some(path) => {
            io::write_json(path, body)?;
            ctx.note(format!("wrote {}", path.display()));
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let written = writeln!(stdout, "{}", serde_json::to_string_pretty(body)?).and_then(|_| stdout.flush());
            match written {
                // A closed pipe (e.g. `| head`) is not an error for the producer.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn verify(ctx: &Ctx, a: VerifyArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => load_suite_config(path)?,
        None => SuiteConfig::default(),
    };
    if let Some(seed) = seed_override()? {
        cfg.master_seed = seed;
    }
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = a.trials {
        cfg.trials = trials;
    }
    if let Some(delta) = a.inject_gram_fault {
        cfg.gram_fault = delta;
    }
    ctx.note(format!(
        "running {} trials x {} sizes x {} dims x {} specs (seed {})",
        cfg.trials,
        cfg.sizes.len(),
        cfg.dims.len(),
        cfg.specs.len(),
        cfg.master_seed
    ));
    let report = run_suite(&cfg)?;
    for c in &report.checks {
        ctx.note(format!("{:<22} {}  margin {:e}", c.name, if c.passed { "pass" } else { "FAIL" }, c.margin));
    }
    emit_json(ctx, a.out.as_deref(), &serde_json::to_value(&report).map_err(Error::from)?)?;
    ctx.note(format!("{}/{} checks passed", report.summary.passed, report.summary.total));
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Checks(ChecksFailed))
    }
}

fn gen(ctx: &Ctx, a: GenArgs) -> Outcome {
    if let Some(input) = &a.close_swaps {
        let out = a.out.as_deref().unwrap_or(input);
        let sample = io::read_pairs(input)?;
        let mode = match a.mode {
            CloseMode::Symmetric => SwapMode::Symmetric,
            CloseMode::Antisymmetric => SwapMode::Antisymmetric,
            CloseMode::Unlabeled => SwapMode::Unlabeled,
        };
        let closed = close_under_swap(&sample, mode)?;
        io::write_pairs(out, &closed)?;
        ctx.note(format!("wrote {} ({} pairs, {} added)", out.display(), closed.len(), closed.len() - sample.len()));
        return Ok(());
    }

    let (Some(n), Some(dir)) = (a.n_points, a.out_dir.as_ref()) else {
        unreachable!("clap enforces --n-points and --out-dir without --close-swaps");
    };
    let seed = a.seed.or(seed_override()?).unwrap_or(42);
    let kind = match a.target {
        Kind::Symmetric => TargetKind::Symmetric,
        Kind::Antisymmetric => TargetKind::Antisymmetric,
        Kind::Ranking => TargetKind::Ranking,
        Kind::Generic => TargetKind::Generic,
    };
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let points = gen_points(n, a.dim, seed)?;
    let sample = sample_pairs(n, seed.wrapping_add(1))?;
    let target = gen_target(kind, &points, &sample, seed.wrapping_add(2))?;
    let labeled = sample.with_labels(target.values.clone())?;
    io::write_points(&dir.join("points.csv"), &points)?;
    io::write_pairs(&dir.join("pairs.csv"), &labeled)?;
    io::write_targets(&dir.join("targets.csv"), &target.values)?;
    ctx.note(format!("wrote {} points and {} pairs to {}", points.len(), labeled.len(), dir.display()));
    Ok(())
}
