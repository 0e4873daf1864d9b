//! AR(p) simulation, theoretical AR spectra and the replication benchmark.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;
use crate::pipeline::{estimate, EstimateConfig, KnotScheme};
use crate::posterior::{coverage_flags, iae};
use crate::signal::TimeSeries;

/// Causal AR(p) process `Y_t = Σ ρ_j Y_{t−j} + e_t`, `e_t ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARModel {
    rho: Vec<f64>,
    sigma2: f64,
}

impl ARModel {
    pub fn new(rho: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "innovation variance {sigma2} must be positive"
            )));
        }
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("AR coefficients must be finite".into()));
        }
        let reflections = reflection_coefficients(&rho)
            .ok_or_else(|| Error::InvalidModel(format!("AR coefficients {rho:?} are not stationary")))?;
        if reflections.iter().any(|k| k.abs() >= 1.0) {
            return Err(Error::InvalidModel(format!(
                "AR coefficients {rho:?} are not stationary"
            )));
        }
        Ok(Self { rho, sigma2 })
    }

    pub fn white_noise(sigma2: f64) -> Result<Self> {
        Self::new(Vec::new(), sigma2)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn order(&self) -> usize {
        self.rho.len()
    }

    /// Theoretical psd at `λ`.
    pub fn psd(&self, lambda: f64) -> f64 {
        ar_psd(self, lambda)
    }
}

/// Step-down (reverse Levinson) recursion. All roots of `1 − Σ ρ_j z^j` lie
/// outside the unit circle iff every returned coefficient has modulus < 1.
/// Returns `None` when the recursion hits a unit reflection.
pub fn reflection_coefficients(rho: &[f64]) -> Option<Vec<f64>> {
    let mut a = rho.to_vec();
    let mut out = Vec::with_capacity(a.len());
    while let Some(&k) = a.last() {
        out.push(k);
        let denom = 1.0 - k * k;
        if denom <= 0.0 {
            return None;
        }
        let m = a.len();
        a = (0..m - 1).map(|j| (a[j] + k * a[m - 2 - j]) / denom).collect();
    }
    out.reverse();
    Some(out)
}

/// `n` observations after discarding `10p + 100` warm-up steps from a zero
/// start.
pub fn simulate_ar(model: &ARModel, n: usize, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.sigma2.sqrt()).expect("positive variance");
    let p = model.order();
    let warmup = 10 * p + 100;
    let total = warmup + n;
    let mut y = vec![0.0; total];
    for t in 0..total {
        let mut value = noise.sample(&mut rng);
        for (j, r) in model.rho.iter().enumerate() {
            if t > j {
                value += r * y[t - 1 - j];
            }
        }
        y[t] = value;
    }
    TimeSeries::from_values(&y[warmup..])
}

/// `σ²/(2π) · 1/|1 − Σ ρ_j e^{−ijλ}|²`.
pub fn ar_psd(model: &ARModel, lambda: f64) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for (j, r) in model.rho.iter().enumerate() {
        let angle = (j + 1) as f64 * lambda;
        re -= r * angle.cos();
        im += r * angle.sin();
    }
    model.sigma2 / (2.0 * PI) / (re * re + im * im)
}

/// `min(⌊n/4⌋, 40)`, but at least `degree + 1`.
pub fn choose_k(n: usize, degree: usize) -> usize {
    (n / 4).min(40).max(degree + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkModel {
    pub name: String,
    pub model: ARModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub models: Vec<BenchmarkModel>,
    pub lengths: Vec<usize>,
    pub replications: usize,
    pub schemes: Vec<KnotScheme>,
    pub orders: Vec<usize>,
    /// Settings shared by every fit; `scheme`, `order` and `chain.seed` are
    /// overridden per cell and replication.
    pub estimate: EstimateConfig,
    pub base_seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Report finished replications on standard error.
    pub progress: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let estimate = EstimateConfig {
            chain: crate::sampler::ChainConfig::desk_scale(),
            ..EstimateConfig::default()
        };
        Self {
            models: vec![
                BenchmarkModel {
                    name: "ar1".into(),
                    model: ARModel::new(vec![0.9], 1.0).expect("stationary"),
                },
                BenchmarkModel {
                    name: "ar4".into(),
                    model: ARModel::new(vec![0.9, -0.9, 0.9, -0.9], 1.0).expect("stationary"),
                },
            ],
            lengths: vec![128, 256, 512],
            replications: 50,
            schemes: vec![KnotScheme::Equidistant, KnotScheme::Qspaced],
            orders: vec![1, 2],
            estimate,
            base_seed: 1,
            jobs: 0,
            progress: false,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.models.is_empty() || self.lengths.is_empty() || self.schemes.is_empty() || self.orders.is_empty() {
            return Err(Error::Config("benchmark grid is empty".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("duplicate model name '{}'", m.name)));
            }
        }
        for &d in &self.orders {
            EstimateConfig {
                order: d,
                ..self.estimate.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    /// `(model index, n, scheme, d)` in output order.
    fn cells(&self) -> Vec<(usize, usize, KnotScheme, usize)> {
        let mut out = Vec::new();
        for mi in 0..self.models.len() {
            for &n in &self.lengths {
                for &scheme in &self.schemes {
                    for &d in &self.orders {
                        out.push((mi, n, scheme, d));
                    }
                }
            }
        }
        out
    }
}

/// SplitMix64 finalizer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Series seed for replication `rep` of `(model, n)`. Every scheme and order
/// sees the same series.
pub fn series_seed(base: u64, model_index: usize, n: usize, rep: usize) -> u64 {
    mix(mix(mix(base ^ model_index as u64) ^ n as u64) ^ rep as u64)
}

fn chain_seed(series: u64, scheme: KnotScheme, d: usize) -> u64 {
    mix(series ^ mix(((scheme as u64) << 8) | d as u64))
}

/// Metrics of one fitted replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub model: String,
    pub n: usize,
    pub scheme: KnotScheme,
    pub d: usize,
    pub replication: usize,
    pub iae: f64,
    pub uniform_covered: bool,
    pub pointwise_coverage: f64,
    pub runtime_seconds: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub n: usize,
    pub scheme: KnotScheme,
    pub d: usize,
    pub median_iae: f64,
    /// Fraction of replications whose band covers the whole true psd.
    pub uniform_coverage: f64,
    pub median_pointwise_coverage: f64,
    pub median_runtime_seconds: f64,
    /// Successful replications.
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub replications: Vec<ReplicationResult>,
    pub failures: usize,
}

impl BenchmarkTable {
    pub fn row(&self, model: &str, n: usize, scheme: KnotScheme, d: usize) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.n == n && r.scheme == scheme && r.d == d)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "model",
            "n",
            "scheme",
            "d",
            "median_iae",
            "uniform_coverage",
            "median_pointwise_coverage",
            "median_runtime_seconds",
            "replications",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.n.to_string(),
                r.scheme.to_string(),
                r.d.to_string(),
                g17(r.median_iae),
                g17(r.uniform_coverage),
                g17(r.median_pointwise_coverage),
                g17(r.median_runtime_seconds),
                r.replications.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Fits one replication of one cell.
pub fn run_replication(
    cfg: &BenchmarkConfig,
    model_index: usize,
    n: usize,
    scheme: KnotScheme,
    d: usize,
    rep: usize,
) -> Result<ReplicationResult> {
    let bm = &cfg.models[model_index];
    let sseed = series_seed(cfg.base_seed, model_index, n, rep);
    let series = simulate_ar(&bm.model, n, sseed)?;
    let mut est_cfg = cfg.estimate.clone();
    est_cfg.scheme = scheme;
    est_cfg.order = d;
    est_cfg.chain.seed = chain_seed(sseed, scheme, d);
    let started = Instant::now();
    let fit = estimate(&series, &est_cfg)?;
    let runtime = started.elapsed().as_secs_f64();
    let truth = |l: f64| ar_psd(&bm.model, l);
    let cov = coverage_flags(&fit.original, truth);
    Ok(ReplicationResult {
        model: bm.name.clone(),
        n,
        scheme,
        d,
        replication: rep,
        iae: iae(&fit.original, truth),
        uniform_covered: cov.uniform_covered,
        pointwise_coverage: cov.pointwise_fraction,
        runtime_seconds: runtime,
        acceptance_rate: fit.samples.diagnostics.acceptance_rate,
    })
}

/// Runs every `(model, n, scheme, d)` cell with `replications` independent
/// series each, in parallel, and reports medians per cell. Failed
/// replications are logged and excluded.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkTable> {
    cfg.validate()?;
    let cells = cfg.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    let work = || -> Vec<(usize, usize, Result<ReplicationResult>)> {
        tasks
            .par_iter()
            .map(|&(c, rep)| {
                let (mi, n, scheme, d) = cells[c];
                let out = run_replication(cfg, mi, n, scheme, d, rep);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if cfg.progress {
                    eprintln!(
                        "[{finished}/{total}] {} n={n} {scheme} d={d} rep={rep}",
                        cfg.models[mi].name
                    );
                }
                (c, rep, out)
            })
            .collect()
    };
    let results = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };

    let mut per_cell: Vec<Vec<ReplicationResult>> = vec![Vec::new(); cells.len()];
    let mut failures = 0;
    for (c, rep, out) in results {
        match out {
            Ok(r) => per_cell[c].push(r),
            Err(e) => {
                failures += 1;
                let (mi, n, scheme, d) = cells[c];
                log::warn!(
                    "replication {rep} of {} n={n} {scheme} d={d} failed and is excluded: {e}",
                    cfg.models[mi].name
                );
            }
        }
    }

    let mut rows = Vec::with_capacity(cells.len());
    let mut all = Vec::with_capacity(total);
    for (c, reps) in per_cell.into_iter().enumerate() {
        let (mi, n, scheme, d) = cells[c];
        let count = reps.len();
        let iaes: Vec<f64> = reps.iter().map(|r| r.iae).collect();
        let pointwise: Vec<f64> = reps.iter().map(|r| r.pointwise_coverage).collect();
        let runtimes: Vec<f64> = reps.iter().map(|r| r.runtime_seconds).collect();
        let covered = reps.iter().filter(|r| r.uniform_covered).count();
        rows.push(BenchmarkRow {
            model: cfg.models[mi].name.clone(),
            n,
            scheme,
            d,
            median_iae: median(&iaes),
            uniform_coverage: if count > 0 {
                covered as f64 / count as f64
            } else {
                f64::NAN
            },
            median_pointwise_coverage: median(&pointwise),
            median_runtime_seconds: median(&runtimes),
            replications: count,
        });
        all.extend(reps);
    }
    Ok(BenchmarkTable {
        rows,
        replications: all,
        failures,
    })
}
