//! Bayesian nonparametric estimation of the power spectral density of a
//! stationary time series.
//!
//! The psd is modelled on `[0, π]` as `f(πω) = τ · s(ω)`, where `s` is a
//! mixture of B-spline densities with a Gaussian roughness prior on the
//! log-ratio weights. Posterior draws come from a Metropolis-within-Gibbs
//! sampler driven by the Whittle likelihood of the periodogram.
//!
//! Typical pipeline:
//!
//! 1. [`signal::preprocess`] and [`signal::Periodogram::from_series`]
//! 2. knots from [`splines::KnotVector::equidistant`] or
//!    [`splines::KnotVector::qspaced`], then [`splines::BasisMatrix::new`]
//! 3. a penalty from [`penalty`]
//! 4. [`sampler::run_chain`]
//! 5. [`posterior::uniform_band`] and [`posterior::rescale_to_original`]
//!
//! [`pipeline::estimate`] wires these steps together.

// `!(x > 0.0)` also rejects NaN, which is the intent wherever it appears.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod format;
pub mod model;
pub mod penalty;
pub mod pipeline;
pub mod posterior;
pub mod quadrature;
pub mod sampler;
pub mod signal;
pub mod simulate;
pub mod splines;

pub use error::{Error, Result};
