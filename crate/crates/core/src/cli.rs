//! The `hawkes-lab` command line.
//!
//! Exit codes: 0 success, 1 malformed input or unmet precondition, 2 a
//! numerical failure or a verification outside tolerance. Errors are printed
//! to stderr as a single `error[CODE]: message` line; run provenance (config
//! echo, config hash, seed, version) is logged to stderr as `info:` lines.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{LabError, Result};
use crate::estimation::{fit_exp_hawkes, fit_marks_from_prices, parse_bucket_edges, FitResult};
use crate::exec::{Execution, WORKERS_ENV};
use crate::hawkes::{simulate, time_rescale};
use crate::io::{self, content_hash, csv as codecs, load_config, write_atomic, write_report, RunConfig};
use crate::limits::{diffusion_limit, DiffusionLimit, RateBudget};
use crate::mc::{verify_fclt, verify_lln, McOutcome, McReport, VerifyParams};
use crate::price::simulate_price;
use crate::stats::ks_test;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const AFTER_HELP: &str = concat!(
    "Model configs are strict JSON (schema version 1): s0, lambda | regimes{A, lambdas}, kernel{type, ...}, \
     optional nonlinearity{type, ..., lip}, marks{P, a}, max_events, truncate_power_law, \
     rate_estimation{horizon, burn_in, paths, seed}. Unknown keys are rejected.\n\
     Exit codes: 0 ok, 1 invalid input, 2 numerical or statistical failure.\n\
     The worker count defaults to the ",
    "HAWKES_LAB_WORKERS",
    " environment variable; it never changes any reported number."
);

#[derive(Debug, Parser)]
#[command(name = "hawkes-lab", version, about = "Compound Hawkes mid-price simulation and limit-theorem verification (config schema v1)", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct WorkersArg {
    /// Worker threads for path-level parallelism.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Lln,
    Fclt,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate event times of the point process to CSV (time,regime).
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON summary of the run.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Simulate a mid-price path to CSV (time,increment,price).
    SimulatePrice {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Diffusion-limit coefficients of a price model.
    Limits {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        workers: WorkersArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo check of the LLN drift or FCLT variance.
    Verify {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 10_000.0)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        workers: WorkersArg,
        /// JSON report; a one-row CSV with the same stem is written beside it.
        #[arg(long)]
        out: PathBuf,
        /// Per-path statistic values as CSV.
        #[arg(long)]
        emit_samples: Option<PathBuf>,
    },
    /// Maximum-likelihood fit of an exponential-kernel Hawkes process.
    Fit {
        /// CSV with a strictly increasing `time` column.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a mark chain from the `price` column of a CSV.
    FitMarks {
        #[arg(long)]
        prices: PathBuf,
        /// Comma-separated increasing bucket edges, e.g. "-inf,-0.005,0.005,inf".
        #[arg(long, allow_hyphen_values = true)]
        buckets: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-rescaled residuals of an event CSV under a configured model.
    Residuals {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        horizon: f64,
        /// Residuals as CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON summary with a KS test against Exp(1).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct Provenance {
    version: &'static str,
    schema_version: u64,
    /// Git-style SHA-256 hash of the input file.
    input_hash: String,
    seed: Option<u64>,
}

fn provenance(input: &[u8], seed: Option<u64>) -> Provenance {
    Provenance { version: VERSION, schema_version: io::SCHEMA_VERSION, input_hash: content_hash(input), seed }
}

fn log_run(label: &str, input: &[u8], echo: Option<&Value>, seed: Option<u64>) {
    if let Some(cfg) = echo {
        eprintln!("info: config {cfg}");
    }
    eprintln!("info: {label}_hash {}", content_hash(input));
    if let Some(s) = seed {
        eprintln!("info: seed {s}");
    }
    eprintln!("info: version {VERSION}");
}

fn load(path: &Path, seed: Option<u64>) -> Result<(RunConfig, String)> {
    let (cfg, text) = load_config(path)?;
    log_run("config", text.as_bytes(), Some(&io::config_to_json(&cfg)), seed);
    Ok((cfg, text))
}

fn rate_budget(cfg: &RunConfig, execution: Execution) -> RateBudget {
    let mut budget = RateBudget { execution, ..Default::default() };
    if let Some(r) = cfg.rate_estimation {
        budget.horizon = r.horizon;
        budget.burn_in = r.burn_in;
        budget.paths = r.paths;
        budget.seed = r.seed;
    }
    budget
}

fn require_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(LabError::Domain(format!("--horizon must be > 0, got {horizon}")))
    }
}

#[derive(Serialize)]
struct LimitsReport<'a> {
    #[serde(flatten)]
    limit: &'a DiffusionLimit,
    provenance: Provenance,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    #[serde(flatten)]
    report: &'a McReport,
    limit: &'a DiffusionLimit,
    provenance: Provenance,
}

#[derive(Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    horizon: f64,
    n_events: usize,
    provenance: Provenance,
}

fn csv_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn verify_row(r: &McReport) -> Vec<(&'static str, String)> {
    vec![
        ("statistic", r.statistic.clone()),
        ("theoretical", r.theoretical.to_string()),
        ("empirical", r.empirical.to_string()),
        ("standard_error", r.standard_error.to_string()),
        ("n_paths", r.n_paths.to_string()),
        ("n", r.n.to_string()),
        ("t", r.t.to_string()),
        ("pass", r.pass.to_string()),
        ("mean_scaled_count", r.mean_scaled_count.to_string()),
        ("ks_statistic", opt(r.ks_statistic)),
        ("ks_p_value", opt(r.ks_p_value)),
    ]
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, horizon, seed, out, report } => {
            require_horizon(horizon)?;
            let (cfg, text) = load(&config.config, Some(seed))?;
            let path = simulate(&cfg.hawkes, horizon, seed)?;
            codecs::write_events(&out, &path.events)?;
            if let Some(rp) = report {
                let summary = json!({
                    "horizon": horizon,
                    "n_events": path.events.len(),
                    "provenance": provenance(text.as_bytes(), Some(seed)),
                });
                write_report(&summary, &rp)?;
            }
            eprintln!("info: wrote {} events to {}", path.events.len(), out.display());
        }
        Command::SimulatePrice { config, horizon, seed, out, report } => {
            require_horizon(horizon)?;
            let (cfg, text) = load(&config.config, Some(seed))?;
            let model = cfg.model()?;
            let path = simulate_price(&model, horizon, seed)?;
            codecs::write_price_path(&out, &path)?;
            if let Some(rp) = report {
                let summary = json!({
                    "horizon": horizon,
                    "n_events": path.events.len(),
                    "s0": path.s0,
                    "final_price": path.final_price(),
                    "provenance": provenance(text.as_bytes(), Some(seed)),
                });
                write_report(&summary, &rp)?;
            }
            eprintln!("info: wrote {} price changes to {}", path.events.len(), out.display());
        }
        Command::Limits { config, workers, out } => {
            let (cfg, text) = load(&config.config, None)?;
            let model = cfg.model()?;
            let budget = rate_budget(&cfg, Execution::from_workers(workers.workers));
            let limit = diffusion_limit(&model, Some(&budget))?;
            let seed = (!model.hawkes.has_linear_intensity() || model.hawkes.nonlinearity.is_some()).then_some(budget.seed);
            write_report(&LimitsReport { limit: &limit, provenance: provenance(text.as_bytes(), seed) }, &out)?;
        }
        Command::Verify { config, mode, n, t, paths, seed, workers, out, emit_samples } => {
            let (cfg, text) = load(&config.config, Some(seed))?;
            let model = cfg.model()?;
            let execution = Execution::from_workers(workers.workers);
            let mut params = VerifyParams::new(n, t, paths, seed).with_execution(execution);
            params.rate_budget = Some(rate_budget(&cfg, execution));
            let McOutcome { report, limit, samples } = match mode {
                Mode::Lln => verify_lln(&model, &params)?,
                Mode::Fclt => verify_fclt(&model, &params)?,
            };
            let doc = VerifyReport { report: &report, limit: &limit, provenance: provenance(text.as_bytes(), Some(seed)) };
            write_report(&doc, &out)?;
            write_atomic(&csv_path(&out), &codecs::row_to_csv(&verify_row(&report))?)?;
            if let Some(sp) = emit_samples {
                write_atomic(&sp, &codecs::samples_to_csv("value", &samples)?)?;
            }
            eprintln!(
                "info: {} empirical {} vs theoretical {} (se {})",
                report.statistic, report.empirical, report.theoretical, report.standard_error
            );
            if !report.pass {
                return Err(LabError::VerificationFailed(format!(
                    "{}: |{} - {}| exceeds {}",
                    report.statistic,
                    report.empirical,
                    report.theoretical,
                    report.tolerance.allowed(report.theoretical, report.standard_error)
                )));
            }
        }
        Command::Fit { events, horizon, out } => {
            require_horizon(horizon)?;
            let bytes = std::fs::read(&events).map_err(|e| LabError::Io(format!("{}: {e}", events.display())))?;
            log_run("events", &bytes, None, None);
            let stream = codecs::read_events(&events, horizon)?;
            let fit = fit_exp_hawkes(&stream.times, horizon, None)?;
            if fit.nonstationary {
                eprintln!("warning: fitted branching ratio {} is not below 1", fit.branching_ratio);
            }
            let doc = FitReport { fit: &fit, horizon, n_events: stream.len(), provenance: provenance(&bytes, None) };
            write_report(&doc, &out)?;
        }
        Command::FitMarks { prices, buckets, out } => {
            let bytes = std::fs::read(&prices).map_err(|e| LabError::Io(format!("{}: {e}", prices.display())))?;
            log_run("prices", &bytes, None, None);
            let edges = parse_bucket_edges(&buckets)?;
            let series = codecs::read_prices(&prices)?;
            let fit = fit_marks_from_prices(&series, &edges)?;
            let edges_json: Vec<Value> = edges
                .iter()
                .map(|e| if e.is_finite() { json!(e) } else { json!(if *e > 0.0 { "inf" } else { "-inf" }) })
                .collect();
            let doc = json!({
                "P": fit.chain.transition,
                "a": fit.chain.marks,
                "counts": fit.counts,
                "buckets": edges_json,
                "provenance": provenance(&bytes, None),
            });
            write_report(&doc, &out)?;
        }
        Command::Residuals { config, events, horizon, out, report } => {
            require_horizon(horizon)?;
            let (cfg, text) = load(&config.config, None)?;
            if cfg.hawkes.is_regime_switched() {
                return Err(LabError::Configuration(
                    "residuals need the regime path, which event CSVs do not carry; use a fixed-background config".into(),
                ));
            }
            let stream = codecs::read_events(&events, horizon)?;
            let stream = crate::hawkes::EventStream { regimes: None, ..stream };
            let residuals = time_rescale(&stream, &cfg.hawkes, None)?;
            write_atomic(&out, &codecs::samples_to_csv("residual", &residuals)?)?;
            if let Some(rp) = report {
                let ks = (!residuals.is_empty()).then(|| ks_test(&residuals, |x| 1.0 - (-x).exp()));
                let doc = json!({
                    "n_residuals": residuals.len(),
                    "mean": if residuals.is_empty() { None } else { Some(residuals.iter().sum::<f64>() / residuals.len() as f64) },
                    "ks_statistic": ks.as_ref().map(|k| k.statistic),
                    "ks_p_value": ks.as_ref().map(|k| k.p_value),
                    "provenance": provenance(text.as_bytes(), None),
                });
                write_report(&doc, &rp)?;
            }
        }
    }
    Ok(())
}

/// Parse `argv` (including the program name), run the command and return the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
