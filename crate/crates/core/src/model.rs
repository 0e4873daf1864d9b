//! The P-spline spectral model `f(πω) = τ · Σ_k w_k b_k(ω)`, its Whittle
//! likelihood and the prior hierarchy on `(v, φ, δ, τ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::PenaltyMatrix;
use crate::signal::Periodogram;
use crate::splines::{BasisMatrix, KnotVector};

/// Log-ratio coordinates `v_k = log(w_k / w_K)`, `k < K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector(pub Vec<f64>);

/// Mixture weights on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(pub Vec<f64>);

impl LatentVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_weights(&self) -> Weights {
        v_to_w(self)
    }
}

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidModel("empty weight vector".into()));
        }
        if let Some(bad) = w.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidModel(format!("weight {bad} is not positive")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Maps log-ratios to the simplex. Shifting by `max(0, max v)` keeps every
/// exponent non-positive.
pub fn v_to_w(v: &LatentVector) -> Weights {
    let mut w = vec![0.0; v.len() + 1];
    v_to_w_into(v.as_slice(), &mut w);
    Weights(w)
}

/// Slice form of [`v_to_w`]; `w` must have length `v.len() + 1`.
pub fn v_to_w_into(v: &[f64], w: &mut [f64]) {
    debug_assert_eq!(w.len(), v.len() + 1);
    let m = v.iter().copied().fold(0.0f64, f64::max);
    let last = (-m).exp();
    let mut total = last;
    for (wk, &vk) in w.iter_mut().zip(v) {
        *wk = (vk - m).exp();
        total += *wk;
    }
    let inv = 1.0 / total;
    let k = v.len();
    for wk in &mut w[..k] {
        *wk *= inv;
    }
    w[k] = last * inv;
}

pub fn w_to_v(w: &Weights) -> Result<LatentVector> {
    if let Some(bad) = w.0.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("weight {bad} is not positive")));
    }
    let k = w.len();
    let log_last = w.0[k - 1].ln();
    Ok(LatentVector(w.0[..k - 1].iter().map(|x| x.ln() - log_last).collect()))
}

/// `s(ω) = Σ_k w_k b_k(ω)`.
pub fn mixture_density(omega: f64, w: &Weights, kv: &KnotVector) -> Result<f64> {
    if w.len() != kv.n_basis() {
        return Err(Error::InvalidModel(format!(
            "{} weights for {} basis densities",
            w.len(),
            kv.n_basis()
        )));
    }
    let b = kv.densities(omega)?;
    Ok(b.iter().zip(w.as_slice()).map(|(b, w)| b * w).sum())
}

/// Gamma/inverse-gamma hyperparameters of the prior hierarchy. Gamma
/// distributions use shape/rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub alpha_phi: f64,
    pub beta_phi: f64,
    pub alpha_delta: f64,
    pub beta_delta: f64,
    pub alpha_tau: f64,
    pub beta_tau: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha_phi: 1.0,
            beta_phi: 1.0,
            alpha_delta: 1e-4,
            beta_delta: 1e-4,
            alpha_tau: 1e-3,
            beta_tau: 1e-3,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_phi,
            self.beta_phi,
            self.alpha_delta,
            self.beta_delta,
            self.alpha_tau,
            self.beta_tau,
        ];
        if all.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("prior hyperparameters must be positive".into()))
        }
    }
}

/// A concrete psd on `[0, π]`.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    tau: f64,
    weights: Weights,
    kv: KnotVector,
}

impl SpectralModel {
    pub fn new(tau: f64, v: &LatentVector, kv: KnotVector) -> Result<Self> {
        Self::from_weights(tau, v_to_w(v), kv)
    }

    pub fn from_weights(tau: f64, weights: Weights, kv: KnotVector) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidModel(format!("tau = {tau} must be positive")));
        }
        if weights.len() != kv.n_basis() {
            return Err(Error::InvalidModel(format!(
                "{} weights for {} basis densities",
                weights.len(),
                kv.n_basis()
            )));
        }
        Ok(Self { tau, weights, kv })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    /// `f(λ) = τ · s(λ/π)`.
    pub fn psd_at(&self, lambda: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&lambda) {
            return Err(Error::Domain(format!("frequency {lambda} outside [0, π]")));
        }
        Ok(self.tau * mixture_density((lambda / PI).min(1.0), &self.weights, &self.kv)?)
    }

    /// psd on the grid of a precomputed basis matrix.
    pub fn psd_on(&self, bm: &BasisMatrix) -> Vec<f64> {
        let mut f = bm.mixture(self.weights.as_slice());
        for x in &mut f {
            *x *= self.tau;
        }
        f
    }
}

/// Whittle log-likelihood `−Σ_l [log f_l + I_l / f_l]` for psd values at the
/// Fourier frequencies.
pub fn whittle_log_likelihood(pgram: &Periodogram, psd: &[f64]) -> Result<f64> {
    if psd.len() != pgram.len() {
        return Err(Error::InvalidModel(format!(
            "{} psd values for {} ordinates",
            psd.len(),
            pgram.len()
        )));
    }
    if let Some(bad) = psd.iter().find(|&&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "psd value {bad} at a Fourier frequency is not positive"
        )));
    }
    Ok(-psd
        .iter()
        .zip(&pgram.ordinates)
        .map(|(f, i)| f.ln() + i / f)
        .sum::<f64>())
}

pub fn model_log_likelihood(pgram: &Periodogram, model: &SpectralModel, bm: &BasisMatrix) -> Result<f64> {
    whittle_log_likelihood(pgram, &model.psd_on(bm))
}

/// Whittle log-likelihood for `f = τ·s` given the mixture values `s_l`.
///
/// Sums logarithms through running products to keep the per-call cost low;
/// products are flushed well before they can over- or underflow.
#[inline]
pub(crate) fn whittle_scaled(ordinates: &[f64], mixture: &[f64], tau: f64) -> f64 {
    const HI: f64 = 1e150;
    const LO: f64 = 1e-150;
    let mut log_sum = 0.0;
    let mut prod = 1.0;
    let mut ratio_sum = 0.0;
    for (&i, &s) in ordinates.iter().zip(mixture) {
        prod *= s;
        ratio_sum += i / s;
        if !(LO..=HI).contains(&prod) {
            log_sum += prod.ln();
            prod = 1.0;
        }
    }
    log_sum += prod.ln();
    let n = ordinates.len() as f64;
    -(n * tau.ln() + log_sum + ratio_sum / tau)
}

/// Gamma(shape, rate) log-density.
pub fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - libm::lgamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Inverse-gamma(shape, scale) log-density.
pub fn inverse_gamma_log_density(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - libm::lgamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Log-density of `v ~ N(0, (φP)⁻¹)`.
pub fn latent_log_density(v: &[f64], phi: f64, penalty: &PenaltyMatrix) -> f64 {
    let m = v.len() as f64;
    -0.5 * m * (2.0 * PI).ln() + 0.5 * m * phi.ln() + 0.5 * penalty.log_det() - 0.5 * phi * penalty.quad_form(v)
}

/// Joint log prior of `(v, φ, δ, τ)`.
pub fn log_prior(
    v: &LatentVector,
    phi: f64,
    delta: f64,
    tau: f64,
    penalty: &PenaltyMatrix,
    cfg: &PriorConfig,
) -> Result<f64> {
    for (name, x) in [("phi", phi), ("delta", delta), ("tau", tau)] {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("{name} = {x} must be positive")));
        }
    }
    if v.len() != penalty.dim() {
        return Err(Error::InvalidModel(format!(
            "latent vector of length {} for a {}-dimensional penalty",
            v.len(),
            penalty.dim()
        )));
    }
    Ok(latent_log_density(v.as_slice(), phi, penalty)
        + gamma_log_density(phi, cfg.alpha_phi, delta * cfg.beta_phi)
        + gamma_log_density(delta, cfg.alpha_delta, cfg.beta_delta)
        + inverse_gamma_log_density(tau, cfg.alpha_tau, cfg.beta_tau))
}
