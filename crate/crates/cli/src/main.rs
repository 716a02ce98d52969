//! `greenkde` command-line interface.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use greenkde::classifier::{self, Histogram, LikelihoodModel};
use greenkde::datagen;
use greenkde::estimator::{DensityModel, RadialProfile};
use greenkde::exec::Execution;
use greenkde::io::{self as gio, PointTable};
use greenkde::knn;
use greenkde::neighbors::NeighborIndex;
use greenkde::sample::Dimension;
use greenkde::solver::{FitConfig, FitReport};
use greenkde::validation;
use greenkde::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_MALFORMED: u8 = 4;
const EXIT_DIMENSION: u8 = 5;
const EXIT_PARAMETER: u8 = 6;
const EXIT_VALIDATION: u8 = 7;

#[derive(Parser)]
#[command(name = "greenkde", version, about = "Dipole-field density estimation and likelihood-ratio classification")]
struct Cli {
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sample.
    Gen(GenArgs),
    /// Fit a dipole field to a point file and save the model.
    Fit(FitArgs),
    /// Density estimates of a model at query points.
    Eval(EvalArgs),
    /// Radial profile of a model's estimates at its own sample points.
    Profile(ProfileArgs),
    /// Flat-kernel k-nearest-neighbour densities.
    Knn(KnnArgs),
    /// Radial profile of k-nearest-neighbour densities at the sample points.
    KnnProfile(KnnProfileArgs),
    /// Likelihood-ratio classification.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Run the numerical oracles for the kernel.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Gauss,
    Twelve,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    /// Sample size; the signal size for `twelve`.
    #[arg(long)]
    n: usize,
    /// Background size for `twelve`; defaults to `--n`.
    #[arg(long)]
    n_background: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output for `gauss`; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_signal: Option<PathBuf>,
    #[arg(long)]
    out_background: Option<PathBuf>,
}

#[derive(Args)]
struct FitOptions {
    /// Points expected in the stable shell while fitting.
    #[arg(long)]
    n_large: usize,
    /// Shell size used for evaluation; defaults to `--n-large`.
    #[arg(long)]
    n_large_eval: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    step_cap: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitOptions {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_large_fit: self.n_large,
            step_cap: self.step_cap,
            tolerance: self.tol,
            max_iterations: self.max_iter,
            restarts: self.restarts,
            seed: self.seed,
        }
    }

    fn n_large_eval(&self) -> usize {
        self.n_large_eval.unwrap_or(self.n_large)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    fit: FitOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Overrides the shell size stored in the model.
    #[arg(long)]
    n_large_eval: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileOptions {
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long, default_value_t = 4.0)]
    rmax: f64,
    /// Comma-separated center; the origin if omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Analytic truth column, `gauss:<sigma>` for a centered isotropic Gaussian.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n_large_eval: Option<usize>,
    #[command(flatten)]
    profile: ProfileOptions,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Query points; the sample points themselves if omitted.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KnnProfileArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    profile: ProfileOptions,
}

#[derive(Subcommand)]
enum ClassifyCommand {
    /// Fit signal and background models.
    Train(TrainArgs),
    /// Responses at query points.
    Apply(ApplyArgs),
    /// Histogram of responses at query points.
    Hist(HistArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    background: PathBuf,
    #[command(flatten)]
    fit: FitOptions,
    #[arg(long, default_value_t = classifier::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    clf: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HistArgs {
    #[arg(long)]
    clf: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure with its diagnostic and exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Csv(c) if c.is_io_error() => EXIT_IO,
            Error::Csv(_)
            | Error::Json(_)
            | Error::Format(_)
            | Error::NonFinite { .. }
            | Error::DuplicatePoints(_)
            | Error::TooFewPoints { .. } => EXIT_MALFORMED,
            Error::DimensionMismatch { .. } | Error::InvalidDimension(_) => EXIT_DIMENSION,
            _ => EXIT_PARAMETER,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Attaches the path to errors raised while reading or writing it.
fn at_path<T>(path: &Path, r: greenkde::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure::new(f.code, format!("{}: {}", path.display(), f.message))
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot create {}: {e}", path.display())))
}

/// Writes to `path`, or to standard output when it is `None`.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> greenkde::Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            at_path(p, f(&mut w))?;
            w.flush()
                .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w).map_err(Failure::from)?;
            w.flush().map_err(|e| Failure::new(EXIT_IO, e.to_string()))
        }
    }
}

fn read_table(path: &Path) -> CliResult<PointTable> {
    at_path(path, gio::read_points(open(path)?))
}

fn read_sample(path: &Path) -> CliResult<greenkde::sample::SampleSet> {
    at_path(path, read_table(path)?.into_sample())
}

fn read_model(path: &Path) -> CliResult<DensityModel> {
    at_path(path, gio::read_model(open(path)?))
}

fn read_classifier(path: &Path) -> CliResult<LikelihoodModel> {
    at_path(path, gio::read_classifier(open(path)?))
}

fn check_dim(path: &Path, expected: Dimension, table: &PointTable) -> CliResult {
    if table.dim != expected {
        return Err(Failure::new(
            EXIT_DIMENSION,
            format!(
                "{}: points have {} coordinates, the model expects {}",
                path.display(),
                table.dim,
                expected
            ),
        ));
    }
    Ok(())
}

fn print_report(report: &FitReport) {
    println!("converged: {}", report.converged);
    println!("iterations: {}", report.iterations_used);
    println!("energy_initial: {:?}", report.energy_initial);
    println!("energy_final: {:?}", report.energy_final);
    println!("mean_misalignment: {:?}", report.mean_misalignment);
    let energies: Vec<String> = report.restart_energies.iter().map(|e| format!("{e:?}")).collect();
    println!("restart_energies: {}", energies.join(","));
}

type Truth = Box<dyn Fn(f64) -> f64>;

fn parse_truth(spec: Option<&str>, dim: Dimension) -> CliResult<Option<Truth>> {
    let Some(spec) = spec else { return Ok(None) };
    let bad = || Failure::new(EXIT_PARAMETER, format!("unknown truth `{spec}`, expected gauss:<sigma>"));
    let sigma: f64 = spec
        .strip_prefix("gauss:")
        .ok_or_else(bad)?
        .parse()
        .map_err(|_| bad())?;
    if !(sigma > 0.0) {
        return Err(bad());
    }
    let n = dim.get();
    Ok(Some(Box::new(move |r| {
        let mut x = vec![0.0; n];
        x[0] = r;
        datagen::gaussian_density(&x, sigma)
    })))
}

fn center(opts: &ProfileOptions, dim: Dimension) -> CliResult<Vec<f64>> {
    match &opts.center {
        None => Ok(vec![0.0; dim.get()]),
        Some(c) if c.len() == dim.get() => Ok(c.clone()),
        Some(c) => Err(Failure::new(
            EXIT_DIMENSION,
            format!("center has {} coordinates, the data {}", c.len(), dim),
        )),
    }
}

fn write_profile(opts: &ProfileOptions, sample: &greenkde::sample::SampleSet, values: &[f64]) -> CliResult {
    let truth = parse_truth(opts.truth.as_deref(), sample.dim())?;
    let c = center(opts, sample.dim())?;
    let profile = RadialProfile::from_values(sample, values, &c, opts.bins, opts.rmax, truth.as_deref())?;
    emit(opts.out.as_deref(), |w| gio::write_profile(w, &profile))
}

fn gen(a: &GenArgs) -> CliResult {
    match a.dist {
        Dist::Gauss => {
            let dim = Dimension::new(a.dim)?;
            let s = datagen::sample_gaussian(dim, a.n, a.sigma, a.seed)?;
            emit(a.out.as_deref(), |w| gio::write_points(w, dim, s.coords()))
        }
        Dist::Twelve => {
            let (Some(sig_out), Some(bkg_out)) = (&a.out_signal, &a.out_background) else {
                return Err(Failure::new(
                    EXIT_USAGE,
                    "--dist twelve requires --out-signal and --out-background",
                ));
            };
            let (sig, bkg) = datagen::sample_twelve_plus_flat(a.n, a.n_background.unwrap_or(a.n), a.seed)?;
            emit(Some(sig_out), |w| gio::write_points(w, sig.dim(), sig.coords()))?;
            emit(Some(bkg_out), |w| gio::write_points(w, bkg.dim(), bkg.coords()))
        }
    }
}

fn fit(a: &FitArgs, exec: Execution) -> CliResult {
    let sample = read_sample(&a.input)?;
    let model = DensityModel::fit_with(sample, &a.fit.config(), a.fit.n_large_eval(), exec)?;
    emit(Some(&a.out), |w| gio::write_model(w, &model))?;
    print_report(model.report());
    Ok(())
}

fn eval(a: &EvalArgs, exec: Execution) -> CliResult {
    let mut model = read_model(&a.model)?;
    if let Some(k) = a.n_large_eval {
        model = model.with_n_large_eval(k)?;
    }
    let table = read_table(&a.input)?;
    check_dim(&a.input, model.dim(), &table)?;
    let dens = model.estimate_batch_with(&table.coords, exec)?;
    emit(a.out.as_deref(), |w| gio::write_point_values(w, table.dim, &table.coords, "density", &dens))
}

fn profile(a: &ProfileArgs, exec: Execution) -> CliResult {
    let mut model = read_model(&a.model)?;
    if let Some(k) = a.n_large_eval {
        model = model.with_n_large_eval(k)?;
    }
    let values = model.estimate_at_samples(exec)?;
    write_profile(&a.profile, model.sample(), &values)
}

fn knn_cmd(a: &KnnArgs, exec: Execution) -> CliResult {
    let index = NeighborIndex::new(read_sample(&a.input)?);
    let dim = index.sample().dim();
    let table = match &a.queries {
        Some(q) => {
            let t = read_table(q)?;
            check_dim(q, dim, &t)?;
            t
        }
        None => PointTable {
            dim,
            coords: index.sample().coords().to_vec(),
        },
    };
    let dens = knn::knn_density_batch(&index, &table.coords, a.k, exec)?;
    emit(a.out.as_deref(), |w| gio::write_point_values(w, dim, &table.coords, "density", &dens))
}

fn knn_profile(a: &KnnProfileArgs, exec: Execution) -> CliResult {
    let index = NeighborIndex::new(read_sample(&a.input)?);
    let values = knn::knn_density_batch(&index, index.sample().coords(), a.k, exec)?;
    write_profile(&a.profile, index.sample(), &values)
}

fn classify(c: &ClassifyCommand, exec: Execution) -> CliResult {
    match c {
        ClassifyCommand::Train(a) => {
            let sig = read_sample(&a.signal)?;
            let bkg = read_sample(&a.background)?;
            let clf = classifier::train_with(sig, bkg, &a.fit.config(), a.fit.n_large_eval(), exec)?;
            let clf = LikelihoodModel::new(clf.signal().clone(), clf.background().clone(), a.epsilon)?;
            emit(Some(&a.out), |w| gio::write_classifier(w, &clf))?;
            println!("[signal]");
            print_report(clf.signal().report());
            println!("[background]");
            print_report(clf.background().report());
            Ok(())
        }
        ClassifyCommand::Apply(a) => {
            let clf = read_classifier(&a.clf)?;
            let table = read_table(&a.input)?;
            check_dim(&a.input, clf.signal().dim(), &table)?;
            let r = clf.responses(&table.coords, exec)?;
            emit(a.out.as_deref(), |w| gio::write_point_values(w, table.dim, &table.coords, "response", &r))
        }
        ClassifyCommand::Hist(a) => {
            let clf = read_classifier(&a.clf)?;
            let table = read_table(&a.input)?;
            check_dim(&a.input, clf.signal().dim(), &table)?;
            let r = clf.responses(&table.coords, exec)?;
            let hist = Histogram::from_values(&r, a.bins)?;
            emit(a.out.as_deref(), |w| gio::write_histogram(w, &hist))
        }
    }
}

fn validate(a: &ValidateArgs) -> CliResult {
    let report = validation::run_validation(Dimension::new(a.dim)?, a.seed)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VALIDATION, "validation failed"))
    }
}

fn run(cli: &Cli) -> CliResult {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::new(EXIT_PARAMETER, e.to_string()))?;
    let exec = Execution::Parallel;
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit(a, exec),
        Command::Eval(a) => eval(a, exec),
        Command::Profile(a) => profile(a, exec),
        Command::Knn(a) => knn_cmd(a, exec),
        Command::KnnProfile(a) => knn_profile(a, exec),
        Command::Classify(c) => classify(c, exec),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("greenkde: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
