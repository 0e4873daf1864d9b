//! End-to-end estimation: raw series to rescaled uniform band.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PriorConfig;
use crate::penalty::{derivative_penalty, difference_penalty, PenaltyMatrix, DEFAULT_EPSILON};
use crate::posterior::{rescale_to_original, uniform_band, PosteriorSamples, PsdEstimate, DEFAULT_ALPHA};
use crate::sampler::{run_chain, ChainConfig, Problem};
use crate::signal::{preprocess, Periodogram, TimeSeries};
use crate::simulate::choose_k;
use crate::splines::{BasisMatrix, KnotVector, DEFAULT_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnotScheme {
    Equidistant,
    Qspaced,
}

impl fmt::Display for KnotScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnotScheme::Equidistant => "equidistant",
            KnotScheme::Qspaced => "qspaced",
        })
    }
}

impl FromStr for KnotScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equidistant" | "equal" => Ok(KnotScheme::Equidistant),
            "qspaced" | "q-spaced" | "quantile" => Ok(KnotScheme::Qspaced),
            other => Err(Error::Config(format!("unknown knot scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub scheme: KnotScheme,
    /// Number of B-spline densities; `None` picks `min(⌊n/4⌋, 40)`.
    pub n_basis: Option<usize>,
    pub degree: usize,
    /// Penalty order.
    pub order: usize,
    pub apply_sqrt: bool,
    pub alpha: f64,
    pub epsilon: f64,
    pub prior: PriorConfig,
    pub chain: ChainConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            scheme: KnotScheme::Qspaced,
            n_basis: None,
            degree: DEFAULT_DEGREE,
            order: 1,
            apply_sqrt: false,
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            prior: PriorConfig::default(),
            chain: ChainConfig::default(),
        }
    }
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Config("spline degree must be at least 1".into()));
        }
        if self.order < 1 || self.order > self.degree {
            return Err(Error::Config(format!(
                "penalty order {} must lie in 1..={}",
                self.order, self.degree
            )));
        }
        if let Some(k) = self.n_basis {
            if k < self.degree + 1 {
                return Err(Error::Config(format!(
                    "K = {k} is below degree + 1 = {}",
                    self.degree + 1
                )));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} must lie in [0, 1)", self.alpha)));
        }
        self.prior.validate()?;
        self.chain.validate()
    }
}

/// Fitted model and its summaries.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub knots: KnotVector,
    pub penalty: PenaltyMatrix,
    pub periodogram: Periodogram,
    pub samples: PosteriorSamples,
    /// Band in standardized units.
    pub standardized: PsdEstimate,
    /// Band in the units of the input series.
    pub original: PsdEstimate,
    pub scale_factor: f64,
}

impl Estimate {
    pub fn n_basis(&self) -> usize {
        self.knots.n_basis()
    }
}

/// Knots for the chosen scheme; flat periodograms fall back to equal spacing
/// inside [`KnotVector::qspaced`].
pub fn build_knots(pgram: &Periodogram, scheme: KnotScheme, n_basis: usize, degree: usize) -> Result<KnotVector> {
    match scheme {
        KnotScheme::Equidistant => KnotVector::equidistant(n_basis, degree),
        KnotScheme::Qspaced => KnotVector::qspaced(pgram, n_basis, degree),
    }
}

/// Difference penalty for equal spacing, derivative penalty otherwise.
pub fn build_penalty(kv: &KnotVector, scheme: KnotScheme, order: usize, epsilon: f64) -> Result<PenaltyMatrix> {
    match scheme {
        KnotScheme::Equidistant => difference_penalty(kv.n_basis(), order, epsilon),
        KnotScheme::Qspaced => derivative_penalty(kv, order, epsilon),
    }
}

pub fn estimate(series: &TimeSeries, cfg: &EstimateConfig) -> Result<Estimate> {
    cfg.validate()?;
    let pre = preprocess(series, cfg.apply_sqrt)?;
    let pgram = Periodogram::from_series(&pre)?;
    let k = cfg.n_basis.unwrap_or_else(|| choose_k(pre.len(), cfg.degree));
    let knots = build_knots(&pgram, cfg.scheme, k, cfg.degree)?;
    let penalty = build_penalty(&knots, cfg.scheme, cfg.order, cfg.epsilon)?;
    let bm = BasisMatrix::new(&knots, &pgram)?;
    let problem = Problem {
        pgram: &pgram,
        bm: &bm,
        penalty: &penalty,
        prior: &cfg.prior,
    };
    let scale_factor = pre.scale_factor();
    let samples = run_chain(problem, &knots, &cfg.chain, scale_factor)?;
    let standardized = uniform_band(&samples, cfg.alpha)?;
    let original = rescale_to_original(&standardized, scale_factor)?;
    Ok(Estimate {
        knots,
        penalty,
        periodogram: pgram,
        samples,
        standardized,
        original,
        scale_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_parsing() {
        assert_eq!("qspaced".parse::<KnotScheme>().unwrap(), KnotScheme::Qspaced);
        assert_eq!("Equidistant".parse::<KnotScheme>().unwrap(), KnotScheme::Equidistant);
        assert!("other".parse::<KnotScheme>().is_err());
        assert_eq!(KnotScheme::Qspaced.to_string(), "qspaced");
    }

    #[test]
    fn inconsistent_config_is_rejected() {
        let cfg = EstimateConfig {
            order: 4,
            ..EstimateConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EstimateConfig {
            n_basis: Some(3),
            ..EstimateConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(EstimateConfig::default().validate().is_ok());
    }
}
