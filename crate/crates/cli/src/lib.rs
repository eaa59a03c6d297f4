//! Command-line front end. Every command reads an experiment plan (a JSON
//! file or a named preset, then `--set key=value` overrides), writes its
//! outputs plus the resolved `plan.json` into `--out`, and exits with
//! 0 on success, 2 for configuration errors, 3 for numeric or convergence
//! failures and 4 for I/O problems.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

use cyclo_gev::gev::threshold_for_pf;
use cyclo_gev::harness::{self, ExperimentPlan};
use cyclo_gev::io;
use cyclo_gev::scd::{alpha_profile, ScdEstimator};
use cyclo_gev::seed::{self, Stream};
use cyclo_gev::siggen::{generate_am, generate_awgn_at, mix_at_snr, NoiseSpec};
use cyclo_gev::{Error, ErrorClass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "cyclo-gev",
    version,
    about = "Cyclostationary AM detection with GEV noise thresholds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment plan (JSON). Defaults to the `desk` preset.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub plan: Option<PathBuf>,

    /// Built-in plan: `desk` or `paper`.
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Override a plan field, e.g. `--set noise_windows_L=200` or
    /// `--set scd_cfg.taper=rectangular`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an AM signal (optionally mixed with noise) as raw f64 samples.
    Gen {
        /// Mix with white noise at this SNR (dB, full band).
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        /// Message seed; derived from the plan's master seed when absent.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the SCD of one window on the plan's α grid.
    Scd {
        /// Signal written by `gen`; a noise window is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Window index within the input.
        #[arg(long, default_value_t = 0)]
        window: usize,
        /// Generate a signal-plus-noise window at this SNR instead of noise.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "input")]
        snr: Option<f64>,
    },
    /// Collect the noise-only α-profile samples used for fitting.
    Collect,
    /// Fit the GEV noise model and write the histogram comparison.
    Fit {
        /// Sample CSV from `collect` (or a one-column file); collected from
        /// the plan when absent.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Print the detection threshold for a false-alarm probability.
    Threshold {
        #[arg(long)]
        pf: f64,
        #[arg(long)]
        fit: PathBuf,
    },
    /// Fit the noise model and sweep the ROC curves for every SNR.
    Roc {
        /// Use this fitted model instead of fitting a fresh one.
        #[arg(long)]
        fit: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Config(String),
    NotConverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Numeric => EXIT_NUMERIC,
                ErrorClass::Io => EXIT_IO,
            },
            Failure::Config(_) => EXIT_CONFIG,
            Failure::NotConverged(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Config(m) => write!(f, "{m}"),
            Failure::NotConverged(m) => write!(f, "fit did not converge: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Sets `key` (dotted path) in `root` to `raw`, read as JSON when it parses
/// and as a string otherwise. The key must already exist.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override '{assignment}' is not KEY=VALUE")))?;
    let mut node = &mut *root;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Failure::Config(format!("unknown plan key '{key}'")))?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// Plan file or preset, then overrides, then validation.
pub fn resolve_plan(
    plan: Option<&Path>,
    preset: Option<&str>,
    overrides: &[String],
) -> CliResult<ExperimentPlan> {
    let base = match (plan, preset) {
        (Some(path), _) => io::read_json::<ExperimentPlan>(path)?,
        (None, Some(name)) => ExperimentPlan::preset(name).ok_or_else(|| {
            Failure::Config(format!("unknown preset '{name}' (expected desk or paper)"))
        })?,
        (None, None) => ExperimentPlan::desk(),
    };
    let mut value = serde_json::to_value(&base).expect("plan serialises");
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let resolved: ExperimentPlan = serde_json::from_value(value)
        .map_err(|e| Failure::Config(format!("plan after overrides: {e}")))?;
    resolved.validate()?;
    Ok(resolved)
}

/// Six significant digits.
pub fn format_threshold(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i64).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_plan(out: &Path, plan: &ExperimentPlan) -> CliResult<()> {
    io::write_json(&out.join("plan.json"), plan)?;
    Ok(())
}

fn gen(cli: &Cli, plan: &ExperimentPlan, snr: Option<f64>, seed_arg: Option<u64>) -> CliResult<()> {
    let spec = &plan.signal_spec;
    spec.validate()?;
    let message_seed =
        seed_arg.unwrap_or_else(|| seed::derive(plan.master_seed, Stream::Message, 0, 0));
    let mut signal = generate_am(spec, message_seed)?;
    if let Some(snr) = snr {
        let noise = NoiseSpec {
            variance: plan.noise_variance,
            seed: seed::derive(plan.master_seed, Stream::SignalNoise, 0, 0),
        };
        let noise = generate_awgn_at(signal.len(), &noise, spec.sample_rate_hz)?;
        signal = mix_at_snr(&signal, &noise, snr)?;
    }
    io::write_signal(&cli.out.join("signal.f64"), &signal, spec, message_seed)?;
    write_plan(&cli.out, plan)
}

fn scd(
    cli: &Cli,
    plan: &ExperimentPlan,
    input: Option<&Path>,
    window: usize,
    snr: Option<f64>,
) -> CliResult<()> {
    let k = plan.window_length();
    let buffer = match (input, snr) {
        (Some(path), _) => {
            let (signal, _) = io::read_signal(path)?;
            let available = signal.len() / k;
            if window >= available {
                return Err(Failure::Config(format!(
                    "window {window} requested, {} holds {available} windows of {k} samples",
                    path.display()
                )));
            }
            signal.slice(window * k, k)?
        }
        (None, Some(snr)) => plan.signal_window_at(snr, 0, window)?,
        (None, None) => plan.noise_window(Stream::FitNoise, 0, window)?,
    };
    let estimator = ScdEstimator::new(plan.scd_cfg.clone())?;
    let matrix = estimator.estimate(&buffer)?.with_window_index(window);
    io::write_scd(&cli.out.join("scd.bin"), &matrix, &plan.scd_cfg)?;
    io::write_profiles(&cli.out.join("profile.csv"), &[alpha_profile(&matrix)?])?;
    write_plan(&cli.out, plan)
}

fn collect(cli: &Cli, plan: &ExperimentPlan) -> CliResult<()> {
    let samples = harness::collect_noise_profile(plan)?;
    write_samples(&cli.out.join("profile.csv"), plan, &samples)?;
    write_plan(&cli.out, plan)
}

fn write_samples(path: &Path, plan: &ExperimentPlan, samples: &[f64]) -> CliResult<()> {
    let alpha_hz = plan.alpha0_hz();
    let profiles: Vec<_> = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| cyclo_gev::scd::AlphaProfile {
            alphas: vec![alpha_hz],
            alpha_bins: vec![plan.alpha0_bins()],
            maxima: vec![v],
            window_index: i,
        })
        .collect();
    io::write_profiles(path, &profiles)?;
    Ok(())
}

fn fit(cli: &Cli, plan: &ExperimentPlan, samples: Option<&Path>) -> CliResult<()> {
    let samples = match samples {
        Some(path) => io::read_samples(path)?,
        None => harness::collect_noise_profile(plan)?,
    };
    let report = harness::fit_and_histogram(&samples, plan.histogram_bins, &plan.fit)?;
    io::write_fit(&cli.out.join("fit.json"), &report.fit)?;
    io::write_histogram(&cli.out.join("histogram.csv"), &report)?;
    write_plan(&cli.out, plan)?;
    log::info!("fit {:?}, KS {}", report.fit.params, report.ks_statistic);
    check_converged(&report.fit)
}

fn check_converged(fit: &cyclo_gev::gev::FitReport) -> CliResult<()> {
    if fit.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "stopped after {} iterations at tol {}",
            fit.iterations, fit.tol
        )))
    }
}

fn threshold(pf: f64, fit_path: &Path) -> CliResult<()> {
    let fit = io::read_fit(fit_path)?;
    println!("{}", format_threshold(threshold_for_pf(pf, &fit.params)?));
    Ok(())
}

fn roc(cli: &Cli, plan: &ExperimentPlan, fit_path: Option<&Path>) -> CliResult<()> {
    plan.validate_statistical()?;
    let (model, fit_report) = match fit_path {
        Some(path) => {
            let report = io::read_fit(path)?;
            (report.params, report)
        }
        None => {
            let samples = harness::collect_noise_profile(plan)?;
            let hist = harness::fit_and_histogram(&samples, plan.histogram_bins, &plan.fit)?;
            io::write_histogram(&cli.out.join("histogram.csv"), &hist)?;
            log::info!("fit {:?}, KS {}", hist.fit.params, hist.ks_statistic);
            (hist.fit.params, hist.fit)
        }
    };
    io::write_fit(&cli.out.join("fit.json"), &fit_report)?;
    for curve in harness::run_roc(plan, &model)? {
        log::info!(
            "SNR {} dB: max |ΔPd| {}",
            curve.snr_db,
            curve.max_abs_pd_gap()
        );
        io::write_roc(&cli.out.join(io::roc_file_name(curve.snr_db)), &curve)?;
    }
    write_plan(&cli.out, plan)?;
    check_converged(&fit_report)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Command::Threshold { pf, fit } = &cli.command {
        return threshold(*pf, fit);
    }
    let plan = resolve_plan(cli.plan.as_deref(), cli.preset.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Gen { snr, seed } => gen(cli, &plan, *snr, *seed),
        Command::Scd { input, window, snr } => scd(cli, &plan, input.as_deref(), *window, *snr),
        Command::Collect => collect(cli, &plan),
        Command::Fit { samples } => fit(cli, &plan, samples.as_deref()),
        Command::Roc { fit } => roc(cli, &plan, fit.as_deref()),
        Command::Threshold { .. } => unreachable!(),
    }
}

/// Runs parsed arguments, returning the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    if cli.verbose {
        let _ = env_logger::Builder::new()
            .filter_level(log::LevelFilter::Info)
            .try_init();
    }
    let result = match cli.jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Failure::Config(format!("thread pool: {e}"))),
        },
        None => dispatch(cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
