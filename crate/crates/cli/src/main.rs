//! `cofactor` command-line tool.
//!
//! Exit status is the only success signal: 0 on success, 2 for bad input or
//! usage, 3 when the solver cannot produce a fit. Diagnostics go to stderr;
//! stdout carries results only (the chosen K for `select-k`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cofactor::baselines::{check_uniform_spacing, fourier_lowpass, kalman_smooth_local_level, KalmanMode};
use cofactor::io::{read_csv, select_interval, write_factors_csv, write_matrix_csv, Interval, RunReport};
use cofactor::simulation::{run_replications, Method, ReplicationSummary, ScenarioConfig};
use cofactor::solver::{
    clean, default_k_max, fit, select_num_factors, KSelectionReport, SolverOptions, DEFAULT_DECREASE_THRESHOLD,
    DEFAULT_MIN_SIGNALS,
};
use cofactor::{column_stats, numerics, Error, SignalMatrix, TrimConstant};

const SEED_ENV: &str = "COFACTOR_SEED";

#[derive(Parser)]
#[command(name = "cofactor", version, about = "Remove shared disturbances from co-located sensor signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit common factors and write the cleaned signals.
    Clean(CleanArgs),
    /// Fit K = 0..k-max and pick the factor count.
    SelectK(SelectArgs),
    /// Run the synthetic contamination study.
    Simulate(SimulateArgs),
    /// Compare contaminated, Fourier, Kalman and common-factor estimates.
    Compare(CompareArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Name of the time column.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Comma-separated signal columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    signals: Vec<String>,
    /// Inclusive time window `start:end`, in the file's time units.
    #[arg(long)]
    interval: Option<String>,
}

#[derive(Args)]
struct SolverArgs {
    /// Trim constant for factor centering.
    #[arg(long = "c", default_value_t = TrimConstant::DEFAULT.get())]
    trim: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    max_iter: usize,
    /// Relative tolerance on the weighted SSE change.
    #[arg(long, default_value_t = SolverOptions::default().relative_tolerance)]
    tol: f64,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions, Error> {
        let opts = SolverOptions {
            max_iterations: self.max_iter,
            relative_tolerance: self.tol,
            trim: TrimConstant::new(self.trim)?,
            ..SolverOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Args)]
struct SelectionArgs {
    /// Largest K to try (default: min(signals - 1, 5)).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MIN_SIGNALS)]
    min_signals: usize,
    #[arg(long, default_value_t = DEFAULT_DECREASE_THRESHOLD)]
    decrease_threshold: f64,
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of factors.
    #[arg(long, required_unless_present = "auto_k", conflicts_with = "auto_k")]
    k: Option<usize>,
    /// Choose K from the standard-error table.
    #[arg(long)]
    auto_k: bool,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML file whose keys are scenario fields; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// Base seed; the COFACTOR_SEED environment variable takes precedence.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Fourier cutoff as a fraction of the Nyquist frequency.
    #[arg(long)]
    cutoff_fraction: f64,
    #[arg(long, requires = "kalman_r", conflicts_with = "kalman_estimate")]
    kalman_q: Option<f64>,
    #[arg(long, requires = "kalman_q", conflicts_with = "kalman_estimate")]
    kalman_r: Option<f64>,
    /// Estimate Kalman variances by maximum likelihood (the default).
    #[arg(long)]
    kalman_estimate: bool,
    /// Factors used by the common-factor column.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_solver_failure() { 3 } else { 2 }, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    bytes: Vec<u8>,
    matrix: SignalMatrix,
    interval: Option<Interval>,
}

fn load(args: &InputArgs, k_for_interval: usize) -> Result<Loaded, Failure> {
    let bytes = fs::read(&args.input).map_err(|e| usage(format!("{}: {e}", args.input.display())))?;
    let mut matrix = read_csv(bytes.as_slice(), &args.time_col, &args.signals)?;
    let interval = match &args.interval {
        Some(text) => {
            let iv: Interval = text.parse()?;
            matrix = select_interval(&matrix, &iv, k_for_interval)?;
            Some(iv)
        }
        None => None,
    };
    Ok(Loaded { bytes, matrix, interval })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn selection_report(m: &SignalMatrix, sel: &SelectionArgs, opts: &SolverOptions) -> Result<KSelectionReport, Error> {
    let k_max = sel.k_max.unwrap_or_else(|| default_k_max(m.n_signals()));
    select_num_factors(m, k_max, sel.min_signals, sel.decrease_threshold, opts)
}

fn run_clean(args: CleanArgs) -> Outcome {
    let opts = args.solver.options()?;
    let k_hint = args.k.unwrap_or_else(|| args.selection.k_max.unwrap_or(0));
    let Loaded { bytes, matrix, interval } = load(&args.input, k_hint)?;
    let selection = if args.auto_k { Some(selection_report(&matrix, &args.selection, &opts)?) } else { None };
    let k = match (&selection, args.k) {
        (Some(report), _) => report.chosen_k,
        (None, Some(k)) => k,
        (None, None) => return Err(usage("either --k or --auto-k is required")),
    };
    let fitted = fit(&matrix, k, &opts)?;
    let cleaned = clean(&matrix, &fitted)?;

    let time_col = &args.input.time_col;
    let mut w = create(&args.out_dir, "cleaned.csv")?;
    write_matrix_csv(&mut w, time_col, &cleaned.times, &cleaned.names, &cleaned.values)?;
    w.flush()?;
    let mut w = create(&args.out_dir, "factors.csv")?;
    write_factors_csv(&mut w, time_col, matrix.times(), &fitted.scores.scores)?;
    w.flush()?;
    let report = RunReport::new(&bytes, time_col, interval, &matrix, opts, selection, &fitted, &cleaned);
    fs::write(args.out_dir.join("report.json"), report.to_json()?)?;
    Ok(())
}

fn write_kselect(dir: &Path, report: &KSelectionReport) -> Outcome {
    let mut w = create(dir, "kselect.csv")?;
    let header: Vec<&str> = ["k"]
        .into_iter()
        .chain(report.signal_names.iter().map(String::as_str))
        .chain(["improved", "error"])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for row in &report.rows {
        let mut cells = vec![row.k.to_string()];
        match &row.standard_errors {
            Some(se) => cells.extend(se.iter().map(f64::to_string)),
            None => cells.extend(std::iter::repeat_n(String::new(), report.signal_names.len())),
        }
        cells.push(row.improved.map(|v| v.to_string()).unwrap_or_default());
        cells.push(row.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "'"))).unwrap_or_default());
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn run_select(args: SelectArgs) -> Outcome {
    let opts = args.solver.options()?;
    let k_hint = args.selection.k_max.unwrap_or(0);
    let Loaded { matrix, .. } = load(&args.input, k_hint)?;
    let report = selection_report(&matrix, &args.selection, &opts)?;
    write_kselect(&args.out_dir, &report)?;
    println!("{}", report.chosen_k);
    Ok(())
}

fn write_summary(dir: &Path, s: &ReplicationSummary) -> Outcome {
    let mut w = create(dir, "summary.csv")?;
    writeln!(w, "method,series,true_mean,average_mean,bias,median_sd_of_mean,replications")?;
    for method in Method::ALL {
        for (i, series) in s.method(method).series.iter().enumerate() {
            let avg = series.average_mean();
            let med = series.median_sd_of_mean().map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                method.as_str(),
                i + 1,
                series.true_mean,
                avg,
                avg - series.true_mean,
                med,
                s.replications()
            )?;
        }
    }
    w.flush()?;

    let mut w = create(dir, "histograms.csv")?;
    writeln!(w, "method,series,statistic,bin,lower,upper,count")?;
    for h in &s.histograms {
        let stat = match h.statistic {
            cofactor::simulation::Statistic::Mean => "mean",
            cofactor::simulation::Statistic::SdOfMean => "sd_of_mean",
        };
        for (b, count) in h.counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                h.method.as_str(),
                h.series + 1,
                stat,
                b,
                h.edges[b],
                h.edges[b + 1],
                count
            )?;
        }
    }
    w.flush()?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(s).map_err(Error::from)?)?;
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_toml_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_ENV}='{v}' is not a seed")))?),
        Err(_) => None,
    };
    if let Some(seed) = env_seed.or(args.seed) {
        cfg.base_seed = seed;
    }
    cfg.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| usage(e.to_string()))?;
    let summary = pool.install(|| run_replications(&cfg, true))?;
    write_summary(&args.out_dir, &summary)
}

fn run_compare(args: CompareArgs) -> Outcome {
    let opts = args.solver.options()?;
    let Loaded { matrix, .. } = load(&args.input, args.k)?;
    check_uniform_spacing(matrix.times())?;
    let mode = match (args.kalman_q, args.kalman_r) {
        (Some(q), Some(r)) => KalmanMode::Fixed { q, r },
        _ => KalmanMode::Estimate,
    };
    let fitted = fit(&matrix, args.k, &opts)?;
    let cleaned = clean(&matrix, &fitted)?;
    let raw = column_stats(&matrix);

    let mut w = create(&args.out_dir, "compare.csv")?;
    writeln!(
        w,
        "signal,contaminated_mean,contaminated_se,fourier_mean,fourier_se,kalman_mean,kalman_se,common_factor_mean,common_factor_se"
    )?;
    for (i, name) in matrix.names().iter().enumerate() {
        let col = matrix.column(i);
        let fourier = numerics::mean(&fourier_lowpass(&col, args.cutoff_fraction)?);
        let kalman = kalman_smooth_local_level(&col, mode)?;
        writeln!(
            w,
            "{name},{},{},{fourier},,{},{},{},{}",
            raw[i].mean,
            raw[i].sd_of_mean,
            kalman.smoothed_mean(),
            kalman.standard_error(),
            cleaned.per_signal_mean[i],
            cleaned.per_signal_se[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Clean(a) => run_clean(a),
        Command::SelectK(a) => run_select(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Compare(a) => run_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("cofactor: {message}");
            ExitCode::from(code)
        }
    }
}
