//! Two-stage Metropolis-within-Gibbs sampler.
//!
//! A pilot chain runs in the raw log-ratio coordinates `v`. Its retained
//! draws give a mean `v̄` and covariance `S`, and the final chain then moves
//! in whitened coordinates `β` with `v = S^{1/2} β + v̄`. Each sweep updates
//! `β_1, …, β_{K−1}` by univariate random-walk Metropolis steps (each one
//! moves all of `v`), then draws `φ`, `δ` and `τ` from their conjugate
//! full conditionals.
//!
//! The proposal scale `σ` is tuned towards an acceptance rate in
//! `[0.3, 0.5]` over windows of 50 sweeps during the pilot and the final
//! burn-in, and is frozen afterwards.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_prior, v_to_w_into, w_to_v, whittle_scaled, LatentVector, PriorConfig, Weights};
use crate::penalty::PenaltyMatrix;
use crate::posterior::PosteriorSamples;
use crate::signal::Periodogram;
use crate::splines::{BasisMatrix, KnotVector};

/// Floor on the eigenvalues of the pilot covariance.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Relative floor used when the pilot sample is too small for a full-rank
/// covariance.
const RANK_DEFICIENT_FLOOR: f64 = 1e-6;

/// Guard for supports without periodogram mass in the starting weights.
const INIT_WEIGHT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub pilot_iterations: usize,
    pub pilot_burnin: usize,
    pub pilot_thin: usize,
    pub seed: u64,
    pub target_accept_low: f64,
    pub target_accept_high: f64,
    /// Sweeps per adaptation window.
    pub adapt_window: usize,
    /// Proposal scale at the start of each stage.
    pub initial_sigma: f64,
}

impl Default for ChainConfig {
    /// 20k-iteration pilot plus 80k-iteration final chain, both with 5k
    /// burn-in and thinning 10.
    fn default() -> Self {
        Self {
            iterations: 80_000,
            burnin: 5_000,
            thin: 10,
            pilot_iterations: 20_000,
            pilot_burnin: 5_000,
            pilot_thin: 10,
            seed: 1,
            target_accept_low: 0.3,
            target_accept_high: 0.5,
            adapt_window: 50,
            initial_sigma: 1.0,
        }
    }
}

impl ChainConfig {
    /// Shorter chains for repeated benchmark fits: 5k pilot and 20k final
    /// iterations with 1,250 burn-in and thinning 5.
    pub fn desk_scale() -> Self {
        Self {
            iterations: 20_000,
            burnin: 1_250,
            thin: 5,
            pilot_iterations: 5_000,
            pilot_burnin: 1_250,
            pilot_thin: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.iterations == 0 || self.pilot_iterations == 0 {
            return bad("iteration counts must be positive");
        }
        if self.burnin >= self.iterations {
            return bad("burnin must be smaller than iterations");
        }
        if self.pilot_burnin >= self.pilot_iterations {
            return bad("pilot_burnin must be smaller than pilot_iterations");
        }
        if self.thin == 0 || self.pilot_thin == 0 {
            return bad("thinning must be at least 1");
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be at least 1");
        }
        if !(0.0 < self.target_accept_low
            && self.target_accept_low < self.target_accept_high
            && self.target_accept_high < 1.0)
        {
            return bad("target acceptance band must satisfy 0 < low < high < 1");
        }
        if !(self.initial_sigma >= 0.0) {
            return bad("initial_sigma must be non-negative");
        }
        Ok(())
    }

    /// Number of draws retained by the final chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    pub fn pilot_retained(&self) -> usize {
        (self.pilot_iterations - self.pilot_burnin) / self.pilot_thin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub v: Vec<f64>,
    pub phi: f64,
    pub delta: f64,
    pub tau: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl SamplerState {
    pub fn weights(&self) -> Weights {
        let mut w = vec![0.0; self.v.len() + 1];
        v_to_w_into(&self.v, &mut w);
        Weights(w)
    }
}

/// Mean, covariance and symmetric square root of pilot draws of `v`.
#[derive(Debug, Clone)]
pub struct PilotSummary {
    pub v_bar: DVector<f64>,
    pub s: DMatrix<f64>,
    pub s_half: DMatrix<f64>,
    s_half_inv: DMatrix<f64>,
}

impl PilotSummary {
    /// `v̄ = 0`, `S = I`: proposals act on `v` directly.
    pub fn identity(dim: usize) -> Self {
        Self {
            v_bar: DVector::zeros(dim),
            s: DMatrix::identity(dim, dim),
            s_half: DMatrix::identity(dim, dim),
            s_half_inv: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_draws(draws: &[Vec<f64>]) -> Result<Self> {
        let m = draws.len();
        if m < 2 {
            return Err(Error::DegenerateInput("pilot summary needs at least two draws".into()));
        }
        let dim = draws[0].len();
        if draws.iter().any(|d| d.len() != dim) {
            return Err(Error::DegenerateInput("pilot draws differ in length".into()));
        }
        let mut mean = DVector::zeros(dim);
        for d in draws {
            mean += DVector::from_column_slice(d);
        }
        mean /= m as f64;
        let mut s = DMatrix::zeros(dim, dim);
        for d in draws {
            let c = DVector::from_column_slice(d) - &mean;
            s.ger(1.0, &c, &c, 1.0);
        }
        s /= (m - 1) as f64;
        let floor_ratio = if m <= dim {
            log::warn!("pilot kept {m} draws for a {dim}-dimensional covariance; raising the eigenvalue floor");
            Some(RANK_DEFICIENT_FLOOR)
        } else {
            None
        };
        Self::from_moments(mean, s, floor_ratio)
    }

    fn from_moments(v_bar: DVector<f64>, s: DMatrix<f64>, floor_ratio: Option<f64>) -> Result<Self> {
        let sym = 0.5 * (&s + s.transpose());
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let floor = match floor_ratio {
            Some(r) => (r * top).max(EIGEN_FLOOR),
            None => EIGEN_FLOOR,
        };
        let roots = eig.eigenvalues.map(|l| l.max(floor).sqrt());
        let q = &eig.eigenvectors;
        let s_half = q * DMatrix::from_diagonal(&roots) * q.transpose();
        let s_half_inv = q * DMatrix::from_diagonal(&roots.map(|x| 1.0 / x)) * q.transpose();
        if s_half.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInput("pilot covariance is not finite".into()));
        }
        Ok(Self {
            v_bar,
            s,
            s_half,
            s_half_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.v_bar.len()
    }

    /// `β = S^{-1/2}(v − v̄)`.
    pub fn to_beta(&self, v: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(v) - &self.v_bar;
        (&self.s_half_inv * c).iter().copied().collect()
    }

    /// `v = S^{1/2} β + v̄`.
    pub fn to_v(&self, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        (&self.s_half * b + &self.v_bar).iter().copied().collect()
    }

    fn column(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.s_half.as_slice()[k * n..(k + 1) * n]
    }
}

/// Unnormalized log-density over `v` used by the Metropolis steps.
pub trait LogTarget {
    fn log_density(&mut self, v: &[f64]) -> f64;

    /// Log-density at `proposal = current + step · S^{1/2}[:, k]`. Targets
    /// may exploit the known direction; `accept` is called if the move is
    /// taken.
    fn log_density_step(&mut self, _current: &[f64], proposal: &[f64], _k: usize, _step: f64) -> f64 {
        self.log_density(proposal)
    }

    fn accept(&mut self) {}
}

impl<F: FnMut(&[f64]) -> f64> LogTarget for F {
    fn log_density(&mut self, v: &[f64]) -> f64 {
        self(v)
    }
}

/// `P·S^{1/2}` and the diagonal of `S^{1/2}ᵀ P S^{1/2}`, so that `vᵀPv` can
/// be updated in `O(K)` along a proposal direction.
#[derive(Debug, Clone)]
pub struct PenaltyDirections {
    pu: DMatrix<f64>,
    upu: Vec<f64>,
}

impl PenaltyDirections {
    pub fn new(penalty: &PenaltyMatrix, pilot: &PilotSummary) -> Self {
        let pu = penalty.entries() * &pilot.s_half;
        let upu = (0..pu.ncols())
            .map(|k| pilot.s_half.column(k).dot(&pu.column(k)))
            .collect();
        Self { pu, upu }
    }

    fn column(&self, k: usize) -> &[f64] {
        let n = self.pu.nrows();
        &self.pu.as_slice()[k * n..(k + 1) * n]
    }
}

/// Full conditional of `v` given `(φ, τ)`: Whittle likelihood plus the
/// Gaussian smoothness prior.
pub struct SpectralTarget<'a> {
    ordinates: &'a [f64],
    bm: &'a BasisMatrix,
    penalty: &'a PenaltyMatrix,
    directions: Option<&'a PenaltyDirections>,
    pub phi: f64,
    pub tau: f64,
    weights: Vec<f64>,
    mixture: Vec<f64>,
    quad: f64,
    pending_quad: f64,
}

impl<'a> SpectralTarget<'a> {
    pub fn new(pgram: &'a Periodogram, bm: &'a BasisMatrix, penalty: &'a PenaltyMatrix, phi: f64, tau: f64) -> Self {
        Self {
            ordinates: &pgram.ordinates,
            bm,
            penalty,
            directions: None,
            phi,
            tau,
            weights: vec![0.0; bm.n_basis()],
            mixture: vec![0.0; bm.n_rows()],
            quad: 0.0,
            pending_quad: 0.0,
        }
    }

    /// Enables the incremental quadratic form; `directions` must belong to
    /// the pilot summary driving the proposals.
    pub fn with_directions(mut self, directions: &'a PenaltyDirections) -> Self {
        self.directions = Some(directions);
        self
    }

    fn evaluate(&mut self, v: &[f64], quad: f64) -> f64 {
        v_to_w_into(v, &mut self.weights);
        self.bm.mixture_into(&self.weights, &mut self.mixture);
        let ll = whittle_scaled(self.ordinates, &self.mixture, self.tau);
        let lp = ll - 0.5 * self.phi * quad;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

impl LogTarget for SpectralTarget<'_> {
    fn log_density(&mut self, v: &[f64]) -> f64 {
        self.quad = self.penalty.quad_form(v);
        self.evaluate(v, self.quad)
    }

    fn log_density_step(&mut self, current: &[f64], proposal: &[f64], k: usize, step: f64) -> f64 {
        let quad = match self.directions {
            Some(d) => {
                let cross: f64 = d.column(k).iter().zip(current).map(|(a, b)| a * b).sum();
                self.quad + 2.0 * step * cross + step * step * d.upu[k]
            }
            None => self.penalty.quad_form(proposal),
        };
        self.pending_quad = quad;
        self.evaluate(proposal, quad)
    }

    fn accept(&mut self) {
        self.quad = self.pending_quad;
    }
}

/// One pass of `K − 1` univariate Metropolis steps on `β`. Returns the
/// number of accepted proposals.
pub fn update_v<T: LogTarget, R: Rng>(
    state: &mut SamplerState,
    pilot: &PilotSummary,
    target: &mut T,
    rng: &mut R,
) -> usize {
    let dim = state.v.len();
    let mut current = target.log_density(&state.v);
    let mut proposal = vec![0.0; dim];
    let mut accepted = 0;
    for k in 0..dim {
        let z: f64 = StandardNormal.sample(rng);
        let step = state.sigma * z;
        for ((p, v), c) in proposal.iter_mut().zip(&state.v).zip(pilot.column(k)) {
            *p = v + c * step;
        }
        let cand = target.log_density_step(&state.v, &proposal, k, step);
        let u: f64 = rng.random();
        if u.ln() < cand - current {
            target.accept();
            state.beta[k] += step;
            state.v.copy_from_slice(&proposal);
            current = cand;
            accepted += 1;
        }
    }
    accepted
}

/// `φ | · ~ Gamma((K−1)/2 + α_φ, ½ vᵀPv + δβ_φ)`.
pub fn update_phi<R: Rng>(state: &SamplerState, penalty: &PenaltyMatrix, prior: &PriorConfig, rng: &mut R) -> f64 {
    let (shape, rate) = phi_conditional(state, penalty, prior);
    draw_gamma(shape, rate, rng)
}

pub fn phi_conditional(state: &SamplerState, penalty: &PenaltyMatrix, prior: &PriorConfig) -> (f64, f64) {
    let shape = 0.5 * state.v.len() as f64 + prior.alpha_phi;
    let rate = 0.5 * penalty.quad_form(&state.v) + state.delta * prior.beta_phi;
    (shape, rate)
}

/// `δ | · ~ Gamma(α_φ + α_δ, β_φ φ + β_δ)`.
pub fn update_delta<R: Rng>(state: &SamplerState, prior: &PriorConfig, rng: &mut R) -> f64 {
    let (shape, rate) = delta_conditional(state, prior);
    draw_gamma(shape, rate, rng)
}

pub fn delta_conditional(state: &SamplerState, prior: &PriorConfig) -> (f64, f64) {
    (
        prior.alpha_phi + prior.alpha_delta,
        prior.beta_phi * state.phi + prior.beta_delta,
    )
}

/// `τ | · ~ IG(α_τ + ν, Σ I_l / s_l + β_τ)`, given the mixture values `s_l`.
pub fn update_tau<R: Rng>(ordinates: &[f64], mixture: &[f64], prior: &PriorConfig, rng: &mut R) -> Result<f64> {
    let (shape, scale) = tau_conditional(ordinates, mixture, prior)?;
    Ok(1.0 / draw_gamma(shape, scale, rng))
}

/// Shape and scale of the inverse-gamma conditional of `τ`.
pub fn tau_conditional(ordinates: &[f64], mixture: &[f64], prior: &PriorConfig) -> Result<(f64, f64)> {
    let mut total = 0.0;
    for (i, s) in ordinates.iter().zip(mixture) {
        if !(*s > 0.0) {
            return Err(Error::InvalidModel("mixture vanishes at a Fourier frequency".into()));
        }
        total += i / s;
    }
    Ok((prior.alpha_tau + ordinates.len() as f64, total + prior.beta_tau))
}

fn draw_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    // Tiny shapes can round to zero; keep the state strictly positive.
    g.sample(rng).max(f64::MIN_POSITIVE)
}

/// Multiplicative tuning of the proposal scale towards the target band.
pub fn adapt_sigma(sigma: f64, accept_rate: f64, low: f64, high: f64) -> f64 {
    if accept_rate < low {
        sigma * 0.9
    } else if accept_rate > high {
        sigma * 1.1
    } else {
        sigma
    }
}

/// Starting point: weights proportional to the mean periodogram over each
/// density's support, identity reparametrization.
pub fn init_state(pgram: &Periodogram, kv: &KnotVector, bm: &BasisMatrix) -> SamplerState {
    let grid = pgram.unit_frequencies();
    let k = kv.n_basis();
    let raw: Vec<f64> = (0..k)
        .map(|j| {
            let (a, b) = kv.support(j);
            let (sum, count) = grid
                .iter()
                .zip(&pgram.ordinates)
                .filter(|(w, _)| **w >= a && **w <= b)
                .fold((0.0, 0usize), |(s, c), (_, i)| (s + i, c + 1));
            let level = if count > 0 {
                sum / count as f64
            } else {
                // no Fourier frequency inside a narrow support: nearest ordinate
                let mid = 0.5 * (a + b);
                let nearest = grid
                    .iter()
                    .enumerate()
                    .min_by(|x, y| (x.1 - mid).abs().total_cmp(&(y.1 - mid).abs()))
                    .map(|(l, _)| l)
                    .unwrap_or(0);
                pgram.ordinates[nearest]
            };
            level.max(INIT_WEIGHT_FLOOR)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let w = Weights(raw.iter().map(|x| x / total).collect());
    let v = w_to_v(&w).expect("floored weights are positive").0;

    let s = bm.mixture(w.as_slice());
    let s_total: f64 = s.iter().sum();
    let i_total: f64 = pgram.ordinates.iter().sum();
    let tau = if s_total > 0.0 { i_total / s_total } else { 1.0 };

    SamplerState {
        beta: vec![0.0; v.len()],
        v,
        phi: 1.0,
        delta: 1.0,
        tau: tau.max(INIT_WEIGHT_FLOOR),
        sigma: 1.0,
    }
}

/// Everything the Gibbs cycle needs, shared read-only.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub pgram: &'a Periodogram,
    pub bm: &'a BasisMatrix,
    pub penalty: &'a PenaltyMatrix,
    pub prior: &'a PriorConfig,
}

#[derive(Debug, Clone, Copy, Default)]
struct PhaseStats {
    accepted: usize,
    proposals: usize,
}

impl PhaseStats {
    fn rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// A single chain: owns its RNG and scratch buffers.
struct Gibbs<'a> {
    problem: Problem<'a>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    mixture: Vec<f64>,
}

impl<'a> Gibbs<'a> {
    fn new(problem: Problem<'a>, seed: u64) -> Self {
        Self {
            problem,
            rng: ChaCha8Rng::seed_from_u64(seed),
            weights: vec![0.0; problem.bm.n_basis()],
            mixture: vec![0.0; problem.bm.n_rows()],
        }
    }

    /// One cycle `(v, φ, δ, τ)`; leaves the mixture for the new `v` in
    /// `self.mixture`.
    fn sweep(&mut self, state: &mut SamplerState, pilot: &PilotSummary, dirs: &PenaltyDirections) -> Result<usize> {
        let p = self.problem;
        let mut target = SpectralTarget::new(p.pgram, p.bm, p.penalty, state.phi, state.tau).with_directions(dirs);
        let accepted = update_v(state, pilot, &mut target, &mut self.rng);
        state.phi = update_phi(state, p.penalty, p.prior, &mut self.rng);
        state.delta = update_delta(state, p.prior, &mut self.rng);
        v_to_w_into(&state.v, &mut self.weights);
        p.bm.mixture_into(&self.weights, &mut self.mixture);
        state.tau = update_tau(&p.pgram.ordinates, &self.mixture, p.prior, &mut self.rng)?;
        Ok(accepted)
    }

    /// Runs `iterations` sweeps, adapting `σ` during burn-in and calling
    /// `keep` on every `thin`-th post-burn-in state. Returns post-burn-in
    /// acceptance statistics.
    #[allow(clippy::too_many_arguments)]
    fn run_phase<F>(
        &mut self,
        state: &mut SamplerState,
        pilot: &PilotSummary,
        iterations: usize,
        burnin: usize,
        thin: usize,
        cfg: &ChainConfig,
        mut keep: F,
    ) -> Result<PhaseStats>
    where
        F: FnMut(&SamplerState, &[f64]) -> Result<()>,
    {
        let dim = state.v.len();
        let dirs = PenaltyDirections::new(self.problem.penalty, pilot);
        let mut window = PhaseStats::default();
        let mut kept = PhaseStats::default();
        for it in 0..iterations {
            let accepted = self.sweep(state, pilot, &dirs)?;
            if it < burnin {
                window.accepted += accepted;
                window.proposals += dim;
                if (it + 1).is_multiple_of(cfg.adapt_window) {
                    state.sigma = adapt_sigma(
                        state.sigma,
                        window.rate(),
                        cfg.target_accept_low,
                        cfg.target_accept_high,
                    );
                    window = PhaseStats::default();
                }
            } else {
                kept.accepted += accepted;
                kept.proposals += dim;
                if (it - burnin + 1).is_multiple_of(thin) {
                    keep(state, &self.mixture)?;
                }
            }
        }
        Ok(kept)
    }
}

/// Result of the pilot stage.
#[derive(Debug, Clone)]
pub struct PilotOutcome {
    pub summary: PilotSummary,
    pub last_state: SamplerState,
    pub acceptance_rate: f64,
}

/// Pilot chain in raw `v` coordinates, summarised by the mean and symmetric
/// square root of the covariance of its retained draws.
pub fn pilot_run(problem: Problem<'_>, kv: &KnotVector, cfg: &ChainConfig) -> Result<PilotOutcome> {
    let mut gibbs = Gibbs::new(problem, cfg.seed);
    pilot_with(&mut gibbs, kv, cfg)
}

fn pilot_with(gibbs: &mut Gibbs<'_>, kv: &KnotVector, cfg: &ChainConfig) -> Result<PilotOutcome> {
    cfg.validate()?;
    let p = gibbs.problem;
    let mut state = init_state(p.pgram, kv, p.bm);
    state.sigma = cfg.initial_sigma;
    let identity = PilotSummary::identity(state.v.len());
    let mut draws = Vec::with_capacity(cfg.pilot_retained());
    let stats = gibbs.run_phase(
        &mut state,
        &identity,
        cfg.pilot_iterations,
        cfg.pilot_burnin,
        cfg.pilot_thin,
        cfg,
        |s, _| {
            draws.push(s.v.clone());
            Ok(())
        },
    )?;
    let summary = PilotSummary::from_draws(&draws)?;
    Ok(PilotOutcome {
        summary,
        last_state: state,
        acceptance_rate: stats.rate(),
    })
}

/// Pilot stage followed by the final chain. The final chain starts from the
/// last pilot state, re-expressed in whitened coordinates.
pub fn run_chain(
    problem: Problem<'_>,
    kv: &KnotVector,
    cfg: &ChainConfig,
    scale_factor: f64,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    problem.prior.validate()?;
    if kv.n_basis() != problem.bm.n_basis() || problem.penalty.dim() + 1 != kv.n_basis() {
        return Err(Error::Config("knots, basis matrix and penalty disagree on K".into()));
    }
    let started = Instant::now();
    let mut gibbs = Gibbs::new(problem, cfg.seed);
    let pilot = pilot_with(&mut gibbs, kv, cfg)?;

    let mut state = pilot.last_state.clone();
    state.beta = pilot.summary.to_beta(&state.v);
    state.sigma = cfg.initial_sigma;

    let nu = problem.pgram.len();
    let retained = cfg.retained();
    let mut psd = Vec::with_capacity(retained * nu);
    let mut trace = Vec::with_capacity(retained);
    let p = problem;
    let stats = gibbs.run_phase(
        &mut state,
        &pilot.summary,
        cfg.iterations,
        cfg.burnin,
        cfg.thin,
        cfg,
        |s, mixture| {
            psd.extend(mixture.iter().map(|m| m * s.tau));
            let ll = whittle_scaled(&p.pgram.ordinates, mixture, s.tau);
            let lp = log_prior(&LatentVector(s.v.clone()), s.phi, s.delta, s.tau, p.penalty, p.prior)?;
            trace.push(TraceRow {
                phi: s.phi,
                delta: s.delta,
                tau: s.tau,
                log_posterior: ll + lp,
            });
            Ok(())
        },
    )?;
    let elapsed = started.elapsed().as_secs_f64();
    PosteriorSamples::new(psd, nu, trace, problem.pgram.frequencies.clone(), scale_factor).map(|s| {
        s.with_diagnostics(ChainDiagnostics {
            acceptance_rate: stats.rate(),
            pilot_acceptance_rate: pilot.acceptance_rate,
            final_sigma: state.sigma,
            runtime_seconds: elapsed,
        })
    })
}

/// Per-draw parameter trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phi: f64,
    pub delta: f64,
    pub tau: f64,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Metropolis acceptance rate of the post-burn-in final chain.
    pub acceptance_rate: f64,
    pub pilot_acceptance_rate: f64,
    pub final_sigma: f64,
    pub runtime_seconds: f64,
}
