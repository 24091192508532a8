//! The `renexp` command line: exponent evaluations, parameter sweeps,
//! detection experiments, regular-sampling closed forms and large-holding-time
//! limits, all written as CSV.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::detection::{self, fit_decay_rate, DetectionError};
use crate::exponents::{self, ExponentError, ExponentEstimate, Method};
use crate::linalg::{LinalgError, Matrix};
use crate::model::{GaussMarkovModel, ModelError};
use crate::sampling::RenewalSpec;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
use config::{GridPoint, SweepParam};

#[derive(Debug, Parser)]
#[command(name = "renexp", version, about = "Error exponents for detecting a Gauss-Markov signal under renewal sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub task: Task,
    /// Configuration file; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// CSV destination; overrides `[output] path`. Standard output otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `[mc] seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for replicate chains and detection trials.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Task {
    /// Monte Carlo exponents of both tests at the configured point.
    Exponent,
    /// Monte Carlo exponents along the `[sweep]` grid.
    Sweep,
    /// Simulated Neyman-Pearson tests over the `[detect]` path lengths.
    Detect,
    /// Riccati steady state and closed-form exponents under regular sampling.
    Dare,
    /// Limits of both exponents as the holding times grow without bound.
    Limits,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Linalg(inner) => inner.into(),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<ExponentError> for CliError {
    fn from(e: ExponentError) -> Self {
        match e {
            ExponentError::Config(m) => CliError::Config(m),
            ExponentError::Sampling(s) => CliError::Config(s.to_string()),
            ExponentError::Model(m) => m.into(),
            ExponentError::Linalg(l) => l.into(),
        }
    }
}

impl From<DetectionError> for CliError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::Model(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// CSV text plus one human-readable line per evaluated point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskOutput {
    pub csv: String,
    pub summary: Vec<String>,
}

const EXPONENT_HEADER: &str = "param_name,param_value,method,exponent,stderr,chain_length,seed";

fn push_row(csv: &mut String, name: &str, value: f64, label: &str, e: &ExponentEstimate) {
    writeln!(csv, "{name},{value},{label},{},{},{},{}", e.value, e.stderr, e.chain_length, e.seed)
        .expect("writing to a String cannot fail");
}

fn closed_label(method: Method, test: &str) -> String {
    format!("{method}_{test}")
}

/// The point of a sweep: which model and holding-time law it evaluates.
fn resolve_point(cfg: &RunConfig, param: SweepParam, p: GridPoint) -> Result<(GaussMarkovModel, RenewalSpec), CliError> {
    match param {
        SweepParam::A => {
            let spec = cfg
                .model
                .with_a(p.value)
                .ok_or_else(|| CliError::Config("sweeping `a` needs `kind = scalar_ou` in [model]".into()))?;
            Ok((spec.build()?, cfg.scaled_sampling(1.0).map_err(|e| CliError::Config(e.to_string()))?))
        }
        SweepParam::S => Ok((cfg.model.build()?, cfg.scaled_sampling(p.value).map_err(|e| CliError::Config(e.to_string()))?)),
        SweepParam::SnrDb => Ok((
            cfg.model.with_snr(p.value).build()?,
            cfg.scaled_sampling(1.0).map_err(|e| CliError::Config(e.to_string()))?,
        )),
    }
}

/// The configured point itself, labelled by its time scale.
fn single_point(cfg: &RunConfig) -> GridPoint {
    GridPoint { label: cfg.scale, value: 1.0 }
}

/// Grid points of the configured sweep, or the single configured point labelled by its scale.
fn points(cfg: &RunConfig) -> (SweepParam, Vec<GridPoint>) {
    match &cfg.sweep {
        Some(s) => (s.param, s.grid.clone()),
        None => (SweepParam::S, vec![single_point(cfg)]),
    }
}

fn exponent_rows(cfg: &RunConfig, param: SweepParam, grid: &[GridPoint]) -> Result<TaskOutput, CliError> {
    let mut out = TaskOutput { csv: format!("{EXPONENT_HEADER}\n"), summary: Vec::new() };
    for &p in grid {
        let (model, sampling) = resolve_point(cfg, param, p)?;
        let name = param.name();
        let value = p.label;
        let noise = exponents::mc_exponent_h0_noise(&model, &sampling, &cfg.mc)?;
        let signal = exponents::mc_exponent_h0_signal(&model, &sampling, &cfg.mc)?;
        push_row(&mut out.csv, name, value, &noise.method.to_string(), &noise);
        push_row(&mut out.csv, name, value, &signal.method.to_string(), &signal);
        let mut line = format!(
            "{name} = {value}: xi_h0_noise = {:.6} ± {:.1e}, xi_h0_signal = {:.6} ± {:.1e}",
            noise.value, noise.stderr, signal.value, signal.stderr
        );
        if let Some(period) = sampling.degenerate_value() {
            let reg = exponents::regular_exponents_with_period(&model, period)?;
            let method = Method::RegularClosedForm;
            push_row(&mut out.csv, name, value, &closed_label(method, "h0_noise"), &ExponentEstimate::closed_form(reg.noise, method));
            push_row(&mut out.csv, name, value, &closed_label(method, "h0_signal"), &ExponentEstimate::closed_form(reg.signal, method));
            let _ = write!(line, " (closed form {:.6}, {:.6})", reg.noise, reg.signal);
        }
        out.summary.push(line);
    }
    Ok(out)
}

fn format_matrix(m: &Matrix) -> String {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn dare_rows(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let (param, grid) = points(cfg);
    let mut out = TaskOutput {
        csv: "param_name,param_value,period,p_r,xi_h0_noise,xi_h0_signal\n".into(),
        summary: Vec::new(),
    };
    for p in grid {
        let (model, sampling) = resolve_point(cfg, param, p)?;
        let period = sampling
            .degenerate_value()
            .ok_or_else(|| CliError::Config("the dare task needs `kind = regular` in [sampling]".into()))?;
        let reg = exponents::regular_exponents_with_period(&model, period)?;
        let value = p.label;
        let p_r = format_matrix(&reg.p_r);
        writeln!(out.csv, "{},{value},{period},{p_r},{},{}", param.name(), reg.noise, reg.signal).expect("String write");
        out.summary.push(format!(
            "{} = {value}: P_R = [{p_r}], xi_h0_noise = {:.6}, xi_h0_signal = {:.6}",
            param.name(),
            reg.noise,
            reg.signal
        ));
    }
    Ok(out)
}

fn limit_rows(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let (param, grid) = points(cfg);
    let mut out = TaskOutput { csv: format!("{EXPONENT_HEADER}\n"), summary: Vec::new() };
    for p in grid {
        let (model, _) = resolve_point(cfg, param, p)?;
        let lim = exponents::large_s_limits(&model)?;
        let value = p.label;
        let method = Method::LargeSLimit;
        push_row(&mut out.csv, param.name(), value, &closed_label(method, "h0_noise"), &ExponentEstimate::closed_form(lim.noise, method));
        push_row(&mut out.csv, param.name(), value, &closed_label(method, "h0_signal"), &ExponentEstimate::closed_form(lim.signal, method));
        out.summary.push(format!(
            "{} = {value}: limit xi_h0_noise = {:.6}, limit xi_h0_signal = {:.6}",
            param.name(),
            lim.noise,
            lim.signal
        ));
    }
    Ok(out)
}

fn detect_rows(cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    let model = cfg.model.build()?;
    let sampling = cfg.scaled_sampling(1.0).map_err(|e| CliError::Config(e.to_string()))?;
    let d = &cfg.detect;
    let mut out = TaskOutput { csv: "N,epsilon,beta_hat,rate_hat,censored\n".into(), summary: Vec::new() };
    let mut all = Vec::new();
    for &n in &d.lengths {
        let results =
            detection::estimate_beta_levels(&model, &sampling, n, &d.epsilons, d.trials, d.orientation, cfg.mc.seed)?;
        let mut line = format!("N = {n}:");
        for r in &results {
            writeln!(out.csv, "{},{},{},{},{}", r.n, r.epsilon, r.beta_hat, r.rate_hat, r.censored).expect("String write");
            let _ = write!(line, " eps {} beta {}{}", r.epsilon, r.beta_hat, if r.censored { " (censored)" } else { "" });
        }
        out.summary.push(line);
        all.extend(results);
    }
    for &eps in &d.epsilons {
        let at_eps: Vec<_> = all.iter().copied().filter(|r| r.epsilon == eps).collect();
        out.summary.push(match fit_decay_rate(&at_eps) {
            Some(fit) => format!("eps {eps}: fitted decay rate {:.6} from {} lengths", fit.slope, fit.points),
            None => format!("eps {eps}: fewer than two uncensored lengths, no decay rate"),
        });
    }
    Ok(out)
}

/// Runs one task in-process.
pub fn execute(task: Task, cfg: &RunConfig) -> Result<TaskOutput, CliError> {
    match task {
        Task::Exponent => exponent_rows(cfg, SweepParam::S, &[single_point(cfg)]),
        Task::Sweep => {
            let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("the sweep task needs a [sweep] section".into()))?;
            exponent_rows(cfg, sweep.param, &sweep.grid)
        }
        Task::Detect => detect_rows(cfg),
        Task::Dare => dare_rows(cfg),
        Task::Limits => limit_rows(cfg),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    let out = execute(cli.task, &cfg)?;
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &out.csv).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            for line in &out.summary {
                println!("{line}");
            }
        }
        None => {
            for line in &out.summary {
                eprintln!("{line}");
            }
            print!("{}", out.csv);
        }
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
