//! Command-line and config-file parsing.
//!
//! Precedence, lowest first: built-in defaults (or the named preset), the TOML
//! config file, command-line flags. The thread count additionally honours the
//! `ORDEVO_THREADS` environment variable, below the file and flags.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Figure1Spec, GridSpec, Table1Spec, Variant};
use crate::fitness::{FitnessTask, Target, DEFAULT_TIME_SCALE};
use crate::oracle::TheoremSuiteSpec;

pub const THREADS_ENV: &str = "ORDEVO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ordevo", version, about = "Evolution with higher-order meta-parameters")]
pub struct Cli {
    /// Worker threads (default: ORDEVO_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an orders × betas × seeds grid on one task.
    Simulate(ExperimentArgs),
    /// Coupled common-noise trials for top-k selection.
    TheoremCheck(TheoremArgs),
    /// Growth curves for top-k vs top-1 on the numeric task.
    Figure1(ExperimentArgs),
    /// Forecasting error per target and order with beta tuning.
    Table1(ExperimentArgs),
    /// Fit growth orders to the mean curves of an existing runs.csv.
    Fit(FitArgs),
}

#[derive(Debug, Default, Clone, Args)]
pub struct ExperimentArgs {
    /// TOML file with the same keys as the long flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// figure1-desk, figure1-full, table1-desk or table1-full.
    #[arg(long)]
    pub preset: Option<String>,
    /// numeric or timeseries.
    #[arg(long)]
    pub task: Option<String>,
    /// Comma-separated targets: t, t2, sin, tsint.
    #[arg(long, alias = "target")]
    pub targets: Option<String>,
    /// Comma-separated meta-orders; `sr` (or `srN`) adds a self-referential run.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated noise scales.
    #[arg(long, alias = "betas")]
    pub beta: Option<String>,
    #[arg(long)]
    pub gens: Option<u64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Read beta as a variance (true) or a standard deviation (false).
    #[arg(long)]
    pub beta_is_variance: Option<bool>,
    #[arg(long)]
    pub time_scale: Option<f64>,
    /// Meta-order used for a bare `sr` entry in --orders.
    #[arg(long)]
    pub self_ref_order: Option<usize>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct TheoremArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Trials per configuration for the dominance and top-1 grids.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Trials per configuration for the strict-advantage checks.
    #[arg(long)]
    pub strict_trials: Option<u64>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// runs.csv produced by another subcommand.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub window_start: Option<u64>,
    #[arg(long)]
    pub window_end: Option<u64>,
}

/// Config-file contents. Lists accept a TOML array or a comma-separated string.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<String>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    task: Option<String>,
    #[serde(alias = "target")]
    targets: Option<toml::Value>,
    orders: Option<toml::Value>,
    pop: Option<usize>,
    k: Option<usize>,
    #[serde(alias = "betas")]
    beta: Option<toml::Value>,
    gens: Option<u64>,
    seeds: Option<u64>,
    seed: Option<u64>,
    beta_is_variance: Option<bool>,
    time_scale: Option<f64>,
    self_ref_order: Option<usize>,
    delta: Option<f64>,
    trials: Option<u64>,
    strict_trials: Option<u64>,
    input: Option<PathBuf>,
    window_start: Option<u64>,
    window_end: Option<u64>,
}

fn list_text(key: &str, value: &toml::Value) -> Result<String> {
    let item = |v: &toml::Value| match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        other => Err(Error::config(key, format!("unsupported list entry {other}"))),
    };
    match value {
        toml::Value::Array(items) => Ok(items.iter().map(item).collect::<Result<Vec<_>>>()?.join(",")),
        other => item(other),
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
}

/// Flag-or-file-or-default resolution.
fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_orders(raw: &str, self_ref_order: usize) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for item in split_list(raw) {
        let variant = if item == "sr" {
            Variant::self_referential(self_ref_order)
        } else if let Some(n) = item.strip_prefix("sr") {
            Variant::self_referential(
                n.parse()
                    .map_err(|_| Error::config("orders", format!("bad self-referential order `{item}`")))?,
            )
        } else {
            Variant::standard(
                item.parse()
                    .map_err(|_| Error::config("orders", format!("`{item}` is not a meta-order")))?,
            )
        };
        if !out.contains(&variant) {
            out.push(variant);
        }
    }
    if out.is_empty() {
        return Err(Error::config("orders", "no orders given"));
    }
    Ok(out)
}

pub fn parse_betas(raw: &str) -> Result<Vec<f64>> {
    let betas = split_list(raw)
        .map(|b| {
            b.parse::<f64>()
                .map_err(|_| Error::config("beta", format!("`{b}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if betas.is_empty() {
        return Err(Error::config("beta", "no values given"));
    }
    Ok(betas)
}

pub fn parse_targets(raw: &str) -> Result<Vec<Target>> {
    let targets = split_list(raw).map(str::parse).collect::<Result<Vec<Target>>>()?;
    if targets.is_empty() {
        return Err(Error::config("targets", "no targets given"));
    }
    Ok(targets)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitPlan {
    pub input: PathBuf,
    pub window_start: Option<u64>,
    pub window_end: Option<u64>,
}

/// Fully materialized work description for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Plan {
    Simulate { grids: Vec<GridSpec> },
    TheoremCheck(TheoremSuiteSpec),
    Figure1(Figure1Spec),
    Table1(Table1Spec),
    Fit(FitPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub preset: Option<String>,
    pub plan: Plan,
    pub out: PathBuf,
    pub threads: usize,
}

impl ValidatedConfig {
    pub fn subcommand(&self) -> &'static str {
        match self.plan {
            Plan::Simulate { .. } => "simulate",
            Plan::TheoremCheck(_) => "theorem-check",
            Plan::Figure1(_) => "figure1",
            Plan::Table1(_) => "table1",
            Plan::Fit(_) => "fit",
        }
    }
}

/// Outcome of argument parsing that is not a config.
#[derive(Debug)]
pub enum ParseOutcome {
    Run(Box<ValidatedConfig>),
    /// --help / --version text; exit successfully after printing.
    Info(String),
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn resolve_threads(flag: Option<usize>, file: Option<usize>) -> Result<usize> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(THREADS_ENV, format!("`{v}` is not a thread count")))?,
        ),
        Err(_) => None,
    };
    let threads = flag.or(file).or(from_env).unwrap_or_else(default_threads);
    if threads == 0 {
        return Err(Error::config("threads", "must be at least 1"));
    }
    Ok(threads)
}

fn load_file(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => read_file_config(p),
        None => Ok(FileConfig::default()),
    }
}

fn list_field(key: &str, flag: &Option<String>, file: &Option<toml::Value>) -> Result<Option<String>> {
    match (flag, file) {
        (Some(f), _) => Ok(Some(f.clone())),
        (None, Some(v)) => Ok(Some(list_text(key, v)?)),
        (None, None) => Ok(None),
    }
}

fn experiment_plan(kind: &str, args: &ExperimentArgs, file: &FileConfig) -> Result<(Option<String>, Plan)> {
    let preset = pick(args.preset.clone(), file.preset.clone());
    let self_ref_order = pick(args.self_ref_order, file.self_ref_order).unwrap_or(1);
    let orders = list_field("orders", &args.orders, &file.orders)?
        .map(|o| parse_orders(&o, self_ref_order))
        .transpose()?;
    let betas = list_field("beta", &args.beta, &file.beta)?
        .map(|b| parse_betas(&b))
        .transpose()?;
    let targets = list_field("targets", &args.targets, &file.targets)?
        .map(|t| parse_targets(&t))
        .transpose()?;
    let task = pick(args.task.clone(), file.task.clone());
    let pop = pick(args.pop, file.pop);
    let k = pick(args.k, file.k);
    let gens = pick(args.gens, file.gens);
    let seeds = pick(args.seeds, file.seeds);
    let seed = pick(args.seed, file.seed);
    let beta_is_variance = pick(args.beta_is_variance, file.beta_is_variance);
    let time_scale = pick(args.time_scale, file.time_scale);

    let check_preset = |allowed: &[&str]| -> Result<()> {
        match &preset {
            Some(p) if !allowed.contains(&p.as_str()) => Err(Error::config(
                "preset",
                format!("`{p}` is not valid here (expected one of {})", allowed.join(", ")),
            )),
            _ => Ok(()),
        }
    };

    let plan = match kind {
        "figure1" => {
            check_preset(&["figure1-desk", "figure1-full"])?;
            if task.as_deref().is_some_and(|t| t != "numeric") {
                return Err(Error::config("task", "figure1 runs the numeric task only"));
            }
            let mut spec = match preset.as_deref() {
                Some("figure1-full") => Figure1Spec::full(),
                _ => Figure1Spec::desk(),
            };
            if let Some(v) = orders {
                spec.variants = v;
            }
            if let Some(b) = betas {
                if b.len() != 1 {
                    return Err(Error::config("beta", "figure1 takes a single beta"));
                }
                spec.beta = b[0];
            }
            spec.population_size = pop.unwrap_or(spec.population_size);
            spec.k = k.unwrap_or(spec.k);
            spec.generations = gens.unwrap_or(spec.generations);
            spec.seeds = seeds.unwrap_or(spec.seeds);
            spec.base_seed = seed.unwrap_or(spec.base_seed);
            spec.beta_is_variance = beta_is_variance.unwrap_or(spec.beta_is_variance);
            spec.grid().validate()?;
            Plan::Figure1(spec)
        }
        "table1" => {
            check_preset(&["table1-desk", "table1-full"])?;
            if task.as_deref().is_some_and(|t| t != "timeseries") {
                return Err(Error::config("task", "table1 runs the timeseries task only"));
            }
            let mut spec = match preset.as_deref() {
                Some("table1-full") => Table1Spec::full(),
                _ => Table1Spec::desk(),
            };
            if let Some(t) = targets {
                spec.targets = t;
            }
            if let Some(v) = orders {
                spec.variants = v;
            }
            if let Some(b) = betas {
                spec.betas = b;
            }
            spec.population_size = pop.unwrap_or(spec.population_size);
            spec.k = k.unwrap_or(spec.k);
            spec.generations = gens.unwrap_or(spec.generations);
            spec.seeds = seeds.unwrap_or(spec.seeds);
            spec.base_seed = seed.unwrap_or(spec.base_seed);
            spec.beta_is_variance = beta_is_variance.unwrap_or(spec.beta_is_variance);
            spec.time_scale = time_scale.unwrap_or(spec.time_scale);
            for &t in &spec.targets {
                spec.grid(t).validate()?;
            }
            Plan::Table1(spec)
        }
        _ => {
            if preset.is_some() {
                return Err(Error::config("preset", "simulate does not take a preset"));
            }
            let time_scale = time_scale.unwrap_or(DEFAULT_TIME_SCALE);
            let tasks: Vec<FitnessTask> = match task.as_deref().unwrap_or("numeric") {
                "numeric" => {
                    if targets.is_some() {
                        return Err(Error::config("targets", "the numeric task has no target"));
                    }
                    vec![FitnessTask::Numeric]
                }
                "timeseries" => targets
                    .ok_or_else(|| Error::config("targets", "timeseries needs at least one target"))?
                    .into_iter()
                    .map(|target| FitnessTask::TimeSeries { target, time_scale })
                    .collect(),
                other => {
                    return Err(Error::config("task", format!("`{other}` is not numeric or timeseries")))
                }
            };
            let base = Figure1Spec::desk();
            let grids: Vec<GridSpec> = tasks
                .into_iter()
                .map(|task| GridSpec {
                    task,
                    variants: orders.clone().unwrap_or_else(|| base.variants.clone()),
                    population_size: pop.unwrap_or(base.population_size),
                    ks: vec![k.unwrap_or(base.k)],
                    betas: betas.clone().unwrap_or_else(|| vec![base.beta]),
                    beta_is_variance: beta_is_variance.unwrap_or(true),
                    generations: gens.unwrap_or(base.generations),
                    seeds: seeds.unwrap_or(base.seeds),
                    base_seed: seed.unwrap_or(0),
                })
                .collect();
            for g in &grids {
                g.validate()?;
            }
            Plan::Simulate { grids }
        }
    };
    Ok((preset, plan))
}

fn theorem_plan(args: &TheoremArgs, file: &FileConfig) -> Result<Plan> {
    if file.preset.is_some() {
        return Err(Error::config("preset", "theorem-check does not take a preset"));
    }
    let mut spec = TheoremSuiteSpec::default();
    if let Some(d) = pick(args.delta, file.delta) {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Validation(format!("delta must be positive, got {d}")));
        }
        spec.delta = d;
    }
    if let Some(t) = pick(args.trials, file.trials) {
        spec.dominance_trials = t;
        spec.top1_trials = t;
    }
    if let Some(t) = pick(args.strict_trials, file.strict_trials) {
        spec.advantage_trials = t;
    }
    if spec.dominance_trials == 0 || spec.advantage_trials == 0 {
        return Err(Error::Validation("trial counts must be at least 1".into()));
    }
    spec.base_seed = pick(args.seed, file.seed).unwrap_or(0);
    Ok(Plan::TheoremCheck(spec))
}

fn fit_plan(args: &FitArgs, file: &FileConfig) -> Result<Plan> {
    let input = pick(args.input.clone(), file.input.clone())
        .ok_or_else(|| Error::config("input", "fit needs --input <runs.csv>"))?;
    let window_start = pick(args.window_start, file.window_start);
    let window_end = pick(args.window_end, file.window_end);
    if let (Some(a), Some(b)) = (window_start, window_end) {
        if a < 1 || b < a {
            return Err(Error::Validation(format!("invalid window [{a}, {b}]")));
        }
    }
    Ok(Plan::Fit(FitPlan {
        input,
        window_start,
        window_end,
    }))
}

/// Errors that occur before any work starts.
#[derive(Debug)]
pub enum ConfigError {
    /// Malformed command line (clap's rendered message).
    Usage(String),
    Invalid(Error),
}

/// Parses argv (including the program name) plus any config file into a
/// validated plan with every default filled in.
pub fn parse_config<I, T>(argv: I) -> std::result::Result<ParseOutcome, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(ParseOutcome::Info(e.to_string())),
                _ => Err(ConfigError::Usage(e.to_string())),
            };
        }
    };
    build_config(&cli).map(|c| ParseOutcome::Run(Box::new(c))).map_err(ConfigError::Invalid)
}

fn build_config(cli: &Cli) -> Result<ValidatedConfig> {
    let (config_path, out_flag) = match &cli.command {
        Command::Simulate(a) | Command::Figure1(a) | Command::Table1(a) => (&a.config, &a.out),
        Command::TheoremCheck(a) => (&a.config, &a.out),
        Command::Fit(a) => (&a.config, &a.out),
    };
    let file = load_file(config_path)?;
    let (preset, plan) = match &cli.command {
        Command::Simulate(a) => experiment_plan("simulate", a, &file)?,
        Command::Figure1(a) => experiment_plan("figure1", a, &file)?,
        Command::Table1(a) => experiment_plan("table1", a, &file)?,
        Command::TheoremCheck(a) => (None, theorem_plan(a, &file)?),
        Command::Fit(a) => (None, fit_plan(a, &file)?),
    };
    let out = pick(out_flag.clone(), file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok(ValidatedConfig {
        preset,
        plan,
        out,
        threads: resolve_threads(cli.threads, file.threads)?,
    })
}
