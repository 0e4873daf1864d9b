//! Command-line interface: `estimate`, `simulate` and `bench`.
//!
//! Settings come from an optional flat `key = value` file and are then
//! overridden by flags. Keys match the long flag names; `-` and `_` are
//! interchangeable.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{g17, write_atomic};
use crate::pipeline::{estimate, EstimateConfig, KnotScheme};
use crate::signal::TimeSeries;
use crate::simulate::{run_benchmark, simulate_ar, ARModel, BenchmarkConfig, BenchmarkModel};

#[derive(Debug, Parser)]
#[command(
    name = "pspline-psd",
    version,
    about = "Bayesian P-spline spectral density estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the psd of a series stored one value per line.
    Estimate(EstimateArgs),
    /// Simulate an AR(p) series.
    Simulate(SimulateArgs),
    /// Run the replication benchmark.
    Bench(BenchArgs),
}

/// Flags shared by `estimate` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Knot placement: equidistant or qspaced.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Penalty order.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of B-spline densities (default min(n/4, 40)).
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Spline degree.
    #[arg(long)]
    pub r: Option<usize>,
    /// Square-root transform before standardizing.
    #[arg(long)]
    pub sqrt: bool,
    /// Band level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ridge added to the penalty matrix.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Chain seed; the benchmark's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Final-chain sweeps.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Final-chain burn-in sweeps.
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Keep every thin-th post-burn-in sweep.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Pilot-chain sweeps.
    #[arg(long)]
    pub pilot_iterations: Option<usize>,
    /// Pilot-chain burn-in sweeps.
    #[arg(long)]
    pub pilot_burnin: Option<usize>,
    /// Pilot-chain thinning.
    #[arg(long)]
    pub pilot_thin: Option<usize>,
    /// Gamma shape of φ.
    #[arg(long)]
    pub alpha_phi: Option<f64>,
    /// Gamma rate multiplier of φ (scaled by δ).
    #[arg(long)]
    pub beta_phi: Option<f64>,
    /// Gamma shape of δ.
    #[arg(long)]
    pub alpha_delta: Option<f64>,
    /// Gamma rate of δ.
    #[arg(long)]
    pub beta_delta: Option<f64>,
    /// Inverse-gamma shape of τ.
    #[arg(long)]
    pub alpha_tau: Option<f64>,
    /// Inverse-gamma scale of τ.
    #[arg(long)]
    pub beta_tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input series, one value per line; empty or NA marks a gap.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the parameter trace.
    #[arg(long)]
    pub trace: bool,
    /// Also write every retained psd draw.
    #[arg(long)]
    pub samples: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Only `ar` is supported.
    #[arg(long, default_value = "ar")]
    pub model: String,
    /// Comma-separated AR coefficients; empty for white noise.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub rho: String,
    /// Innovation variance.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Series length.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Flat `key = value` benchmark settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-cell summary CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write per-replication metrics here as well.
    #[arg(long)]
    pub replications_out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Ordered `key = value` settings; keys normalized to `snake_case`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Settings(BTreeMap<String, String>);

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(normalize_key(key), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn overlay(&mut self, m: &ModelArgs) {
        macro_rules! put {
            ($($field:ident => $key:literal),* $(,)?) => {
                $(if let Some(v) = &m.$field { self.set($key, v); })*
            };
        }
        put!(
            scheme => "scheme", d => "d", k => "K", r => "r", alpha => "alpha",
            epsilon => "epsilon", seed => "seed", iterations => "iterations",
            burnin => "burnin", thin => "thin", pilot_iterations => "pilot_iterations",
            pilot_burnin => "pilot_burnin", pilot_thin => "pilot_thin",
            alpha_phi => "alpha_phi", beta_phi => "beta_phi", alpha_delta => "alpha_delta",
            beta_delta => "beta_delta", alpha_tau => "alpha_tau", beta_tau => "beta_tau",
        );
        if m.sqrt {
            self.set("sqrt", true);
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for {key}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Applies one estimation setting. Returns `false` for keys it does not own.
fn apply_estimate_key(cfg: &mut EstimateConfig, key: &str, value: &str) -> Result<bool> {
    let c = &mut cfg.chain;
    let p = &mut cfg.prior;
    match key {
        "scheme" => cfg.scheme = value.parse()?,
        "d" => cfg.order = parse_value(key, value)?,
        "K" | "k" => cfg.n_basis = Some(parse_value(key, value)?),
        "r" | "degree" => cfg.degree = parse_value(key, value)?,
        "sqrt" => cfg.apply_sqrt = parse_bool(key, value)?,
        "alpha" => cfg.alpha = parse_value(key, value)?,
        "epsilon" => cfg.epsilon = parse_value(key, value)?,
        "seed" => c.seed = parse_value(key, value)?,
        "iterations" => c.iterations = parse_value(key, value)?,
        "burnin" => c.burnin = parse_value(key, value)?,
        "thin" => c.thin = parse_value(key, value)?,
        "pilot_iterations" => c.pilot_iterations = parse_value(key, value)?,
        "pilot_burnin" => c.pilot_burnin = parse_value(key, value)?,
        "pilot_thin" => c.pilot_thin = parse_value(key, value)?,
        "alpha_phi" => p.alpha_phi = parse_value(key, value)?,
        "beta_phi" => p.beta_phi = parse_value(key, value)?,
        "alpha_delta" => p.alpha_delta = parse_value(key, value)?,
        "beta_delta" => p.beta_delta = parse_value(key, value)?,
        "alpha_tau" => p.alpha_tau = parse_value(key, value)?,
        "beta_tau" => p.beta_tau = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

const ESTIMATE_PATH_KEYS: [&str; 5] = ["input", "out", "trace", "samples", "config"];

/// Estimation settings from defaults plus `settings`.
pub fn estimate_config(settings: &Settings) -> Result<EstimateConfig> {
    let mut cfg = EstimateConfig::default();
    for (key, value) in settings.iter() {
        if !apply_estimate_key(&mut cfg, key, value)? && !ESTIMATE_PATH_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown setting '{key}'")));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Benchmark settings. Models are given as `model.<name> = ρ₁,ρ₂,…` (empty
/// for white noise) with optional `sigma2.<name>`; other keys are `lengths`,
/// `replications`, `schemes`, `orders`, `jobs` and any estimation setting.
/// Chain settings default to the desk-scale configuration.
pub fn bench_config(settings: &Settings) -> Result<BenchmarkConfig> {
    let mut cfg = BenchmarkConfig::default();
    let mut models: Vec<(String, Vec<f64>)> = Vec::new();
    let mut variances: BTreeMap<String, f64> = BTreeMap::new();
    for (key, value) in settings.iter() {
        if let Some(name) = key.strip_prefix("model.") {
            models.push((name.to_string(), parse_list(key, value)?));
            continue;
        }
        if let Some(name) = key.strip_prefix("sigma2.") {
            variances.insert(name.to_string(), parse_value(key, value)?);
            continue;
        }
        match key {
            "lengths" => cfg.lengths = parse_list(key, value)?,
            "replications" => cfg.replications = parse_value(key, value)?,
            "schemes" => {
                cfg.schemes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse::<KnotScheme>)
                    .collect::<Result<_>>()?
            }
            "orders" => cfg.orders = parse_list(key, value)?,
            "jobs" => cfg.jobs = parse_value(key, value)?,
            "seed" => cfg.base_seed = parse_value(key, value)?,
            "progress" => cfg.progress = parse_bool(key, value)?,
            "scheme" | "d" => {
                return Err(Error::Config(format!(
                    "'{key}' is per cell in a benchmark; use 'schemes' or 'orders'"
                )))
            }
            _ => {
                if !apply_estimate_key(&mut cfg.estimate, key, value)? {
                    return Err(Error::Config(format!("unknown setting '{key}'")));
                }
            }
        }
    }
    if let Some(name) = variances.keys().find(|n| !models.iter().any(|(m, _)| m == *n)) {
        return Err(Error::Config(format!("sigma2.{name} has no matching model")));
    }
    if !models.is_empty() {
        cfg.models = models
            .into_iter()
            .map(|(name, rho)| {
                let sigma2 = variances.get(&name).copied().unwrap_or(1.0);
                Ok(BenchmarkModel {
                    model: ARModel::new(rho, sigma2)?,
                    name,
                })
            })
            .collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    #[serde(rename = "K")]
    k: usize,
    degree: usize,
    n: usize,
    knots: &'a [f64],
    zeta: f64,
    alpha: f64,
    acceptance_rate: f64,
    pilot_acceptance_rate: f64,
    retained_draws: usize,
    scale_factor: f64,
    runtime_seconds: f64,
    seed: u64,
    input: String,
    config: &'a EstimateConfig,
}

fn to_csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Fits the input series and writes `estimate.csv`, `summary.json` and,
/// on request, `trace.csv` and `psd_samples.csv` into the output directory.
/// Nothing is written unless the fit succeeds.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<Vec<PathBuf>> {
    let mut settings = match &args.config {
        Some(p) => Settings::read(p)?,
        None => Settings::default(),
    };
    settings.overlay(&args.model);
    if let Some(p) = &args.input {
        settings.set("input", p.display());
    }
    if let Some(p) = &args.out {
        settings.set("out", p.display());
    }
    let input = settings
        .get("input")
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config("missing --input".into()))?;
    let out_dir = settings
        .get("out")
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config("missing --out".into()))?;
    let want_trace = args.trace
        || settings
            .get("trace")
            .map(|v| parse_bool("trace", v))
            .transpose()?
            .unwrap_or(false);
    let want_samples = args.samples
        || settings
            .get("samples")
            .map(|v| parse_bool("samples", v))
            .transpose()?
            .unwrap_or(false);
    let cfg = estimate_config(&settings)?;

    let series = TimeSeries::read_csv_path(&input)?;
    let fit = estimate(&series, &cfg)?;

    let summary = RunSummary {
        k: fit.n_basis(),
        degree: fit.knots.degree(),
        n: series.len(),
        knots: fit.knots.internal(),
        zeta: fit.original.zeta,
        alpha: fit.original.alpha,
        acceptance_rate: fit.samples.diagnostics.acceptance_rate,
        pilot_acceptance_rate: fit.samples.diagnostics.pilot_acceptance_rate,
        retained_draws: fit.samples.n_draws(),
        scale_factor: fit.scale_factor,
        runtime_seconds: fit.samples.diagnostics.runtime_seconds,
        seed: cfg.chain.seed,
        input: input.display().to_string(),
        config: &cfg,
    };
    let mut outputs = vec![
        ("estimate.csv", to_csv_bytes(|b| fit.original.write_csv(b))?),
        ("summary.json", {
            let mut s = serde_json::to_vec_pretty(&summary)?;
            s.push(b'\n');
            s
        }),
    ];
    if want_trace {
        outputs.push(("trace.csv", to_csv_bytes(|b| fit.samples.write_trace_csv(b))?));
    }
    if want_samples {
        outputs.push(("psd_samples.csv", to_csv_bytes(|b| fit.samples.write_psd_csv(b))?));
    }
    fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    for (name, bytes) in outputs {
        let path = out_dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes a simulated series, one observation per line.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<PathBuf> {
    if !args.model.eq_ignore_ascii_case("ar") {
        return Err(Error::Config(format!("unsupported model '{}'", args.model)));
    }
    let rho: Vec<f64> = parse_list("rho", &args.rho)?;
    let model = ARModel::new(rho, args.sigma2)?;
    let series = simulate_ar(&model, args.n, args.seed)?;
    let mut text = String::with_capacity(series.len() * 24);
    for v in series.values() {
        text.push_str(&g17(v.expect("simulated series has no gaps")));
        text.push('\n');
    }
    write_atomic(&args.out, text.as_bytes())?;
    Ok(args.out.clone())
}

/// Runs the benchmark grid and writes one CSV row per cell.
pub fn cmd_bench(args: &BenchArgs) -> Result<PathBuf> {
    let mut settings = match &args.config {
        Some(p) => Settings::read(p)?,
        None => Settings::default(),
    };
    settings.overlay(&args.model);
    if let Some(j) = args.jobs {
        settings.set("jobs", j);
    }
    let mut cfg = bench_config(&settings)?;
    if settings.get("progress").is_none() {
        cfg.progress = true;
    }
    let table = run_benchmark(&cfg)?;
    if table.failures > 0 {
        eprintln!("{} replications failed and were excluded", table.failures);
    }
    let bytes = to_csv_bytes(|b| table.write_csv(b))?;
    if let Some(path) = &args.replications_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model",
            "n",
            "scheme",
            "d",
            "replication",
            "iae",
            "uniform_covered",
            "pointwise_coverage",
            "runtime_seconds",
            "acceptance_rate",
        ])?;
        for r in &table.replications {
            w.write_record([
                r.model.clone(),
                r.n.to_string(),
                r.scheme.to_string(),
                r.d.to_string(),
                r.replication.to_string(),
                g17(r.iae),
                r.uniform_covered.to_string(),
                g17(r.pointwise_coverage),
                g17(r.runtime_seconds),
                g17(r.acceptance_rate),
            ])?;
        }
        let reps = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(path, &reps)?;
    }
    write_atomic(&args.out, &bytes)?;
    Ok(args.out.clone())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate(a) => {
            for p in cmd_estimate(a)? {
                log::info!("wrote {}", p.display());
            }
        }
        Command::Simulate(a) => {
            cmd_simulate(a)?;
        }
        Command::Bench(a) => {
            cmd_bench(a)?;
        }
    }
    Ok(())
}
