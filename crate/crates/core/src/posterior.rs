//! Posterior summaries: pointwise median, uniform credible band, rescaling
//! to original units, integrated absolute error and coverage.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;
use crate::sampler::{ChainDiagnostics, TraceRow};

pub const DEFAULT_ALPHA: f64 = 0.1;

/// Points of the uniform grid on `[0, π]` used by [`iae`].
pub const IAE_GRID_POINTS: usize = 512;

/// Draws below this count give an unreliable band quantile.
pub const MIN_BAND_DRAWS: usize = 100;

/// Retained psd draws at the Fourier frequencies, in standardized units.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    psd: Vec<f64>,
    nu: usize,
    pub trace: Vec<TraceRow>,
    pub frequencies: Vec<f64>,
    pub scale_factor: f64,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorSamples {
    /// `psd` is row-major: draw `i` occupies `psd[i·ν..(i+1)·ν]`.
    pub fn new(
        psd: Vec<f64>,
        nu: usize,
        trace: Vec<TraceRow>,
        frequencies: Vec<f64>,
        scale_factor: f64,
    ) -> Result<Self> {
        if nu == 0 || !psd.len().is_multiple_of(nu) {
            return Err(Error::DegenerateInput("psd sample matrix has ragged rows".into()));
        }
        if frequencies.len() != nu {
            return Err(Error::DegenerateInput("frequency grid does not match psd draws".into()));
        }
        if psd.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Domain("psd draws must be positive and finite".into()));
        }
        if !(scale_factor > 0.0 && scale_factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor {scale_factor} must be positive")));
        }
        if !trace.is_empty() && trace.len() * nu != psd.len() {
            return Err(Error::DegenerateInput("trace length differs from draw count".into()));
        }
        Ok(Self {
            psd,
            nu,
            trace,
            frequencies,
            scale_factor,
            diagnostics: ChainDiagnostics::default(),
        })
    }

    /// Draws given as one vector per draw; no trace.
    pub fn from_draws(draws: &[Vec<f64>], frequencies: Vec<f64>, scale_factor: f64) -> Result<Self> {
        let nu = frequencies.len();
        if draws.iter().any(|d| d.len() != nu) {
            return Err(Error::DegenerateInput("psd draws differ in length".into()));
        }
        Self::new(draws.concat(), nu, Vec::new(), frequencies, scale_factor)
    }

    pub fn with_diagnostics(mut self, diagnostics: ChainDiagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn n_draws(&self) -> usize {
        self.psd.len() / self.nu
    }

    pub fn n_frequencies(&self) -> usize {
        self.nu
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.psd[i * self.nu..(i + 1) * self.nu]
    }

    pub fn psd_flat(&self) -> &[f64] {
        &self.psd
    }

    /// All draws at frequency index `l`.
    pub fn at_frequency(&self, l: usize) -> Vec<f64> {
        self.psd.iter().skip(l).step_by(self.nu).copied().collect()
    }

    /// `(φ, δ, τ)` per retained draw.
    pub fn param_trace(&self) -> Vec<[f64; 3]> {
        self.trace.iter().map(|t| [t.phi, t.delta, t.tau]).collect()
    }

    pub fn log_posterior_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.log_posterior).collect()
    }

    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phi", "delta", "tau", "log_posterior"])?;
        for t in &self.trace {
            w.write_record([g17(t.phi), g17(t.delta), g17(t.tau), g17(t.log_posterior)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per draw, one column per Fourier frequency.
    pub fn write_psd_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(self.frequencies.iter().map(|x| g17(*x)))?;
        for i in 0..self.n_draws() {
            w.write_record(self.draw(i).iter().map(|x| g17(*x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub median: Vec<f64>,
    pub mad: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub zeta: f64,
    pub alpha: f64,
}

impl PsdEstimate {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    /// Columns `frequency, median, lower, upper`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency", "median", "lower", "upper"])?;
        for l in 0..self.len() {
            w.write_record([
                g17(self.frequencies[l]),
                g17(self.median[l]),
                g17(self.lower[l]),
                g17(self.upper[l]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

pub fn pointwise_median(samples: &PosteriorSamples) -> Vec<f64> {
    (0..samples.n_frequencies())
        .map(|l| median_of(&mut samples.at_frequency(l)))
        .collect()
}

/// Type-1 empirical quantile: the smallest order statistic whose ECDF value
/// reaches `p`.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len();
    // guard against p·m landing a hair above an integer
    let rank = ((p * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(m) - 1]
}

/// Median ± `ζ_α`·mad with `ζ_α` the `(1 − α)` quantile of the per-draw
/// maximum standardized deviation.
pub fn uniform_band(samples: &PosteriorSamples, alpha: f64) -> Result<PsdEstimate> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("band level {alpha} must lie in [0, 1)")));
    }
    let m = samples.n_draws();
    if m == 0 {
        return Err(Error::DegenerateInput("no posterior draws".into()));
    }
    if m < MIN_BAND_DRAWS {
        log::warn!("uniform band from only {m} draws");
    }
    let nu = samples.n_frequencies();
    let mut median = Vec::with_capacity(nu);
    let mut mad = Vec::with_capacity(nu);
    for l in 0..nu {
        let mut col = samples.at_frequency(l);
        let med = median_of(&mut col);
        let mut dev: Vec<f64> = col.iter().map(|x| (x - med).abs()).collect();
        median.push(med);
        mad.push(median_of(&mut dev));
    }
    let smallest = mad.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let zeros = mad.iter().filter(|x| **x <= 0.0).count();
    if zeros > 0 {
        if !smallest.is_finite() {
            return Err(Error::DegenerateInput("all draws identical at every frequency".into()));
        }
        log::warn!("zero mad at {zeros} frequencies; using the smallest positive mad {smallest:e}");
        for x in mad.iter_mut().filter(|x| **x <= 0.0) {
            *x = smallest;
        }
    }
    let maxima: Vec<f64> = (0..m)
        .map(|i| {
            samples
                .draw(i)
                .iter()
                .zip(&median)
                .zip(&mad)
                .map(|((f, med), s)| (f - med).abs() / s)
                .fold(0.0, f64::max)
        })
        .collect();
    let zeta = empirical_quantile(&maxima, 1.0 - alpha);
    let lower = median.iter().zip(&mad).map(|(f, s)| f - zeta * s).collect();
    let upper = median.iter().zip(&mad).map(|(f, s)| f + zeta * s).collect();
    Ok(PsdEstimate {
        frequencies: samples.frequencies.clone(),
        median,
        mad,
        lower,
        upper,
        zeta,
        alpha,
    })
}

/// Multiplies every curve by `scale_factor` (the variance removed during
/// standardization).
pub fn rescale_to_original(estimate: &PsdEstimate, scale_factor: f64) -> Result<PsdEstimate> {
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(Error::Domain(format!("scale factor {scale_factor} must be positive")));
    }
    let scale = |v: &[f64]| v.iter().map(|x| x * scale_factor).collect::<Vec<_>>();
    Ok(PsdEstimate {
        frequencies: estimate.frequencies.clone(),
        median: scale(&estimate.median),
        mad: scale(&estimate.mad),
        lower: scale(&estimate.lower),
        upper: scale(&estimate.upper),
        zeta: estimate.zeta,
        alpha: estimate.alpha,
    })
}

/// Linear interpolation through `(xs, ys)` with flat extension.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let j = xs.partition_point(|&t| t <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] + t * (ys[j] - ys[j - 1])
}

/// `∫₀^π |f̂ − f| dλ` by the trapezoid rule on a uniform 512-point grid.
pub fn iae<F: Fn(f64) -> f64>(estimate: &PsdEstimate, true_psd: F) -> f64 {
    iae_curve(&estimate.frequencies, &estimate.median, true_psd)
}

pub fn iae_curve<F: Fn(f64) -> f64>(frequencies: &[f64], curve: &[f64], true_psd: F) -> f64 {
    let n = IAE_GRID_POINTS;
    let h = PI / (n - 1) as f64;
    let err = |j: usize| {
        let lambda = if j == n - 1 { PI } else { j as f64 * h };
        (interpolate(frequencies, curve, lambda) - true_psd(lambda)).abs()
    };
    let interior: f64 = (1..n - 1).map(err).sum();
    h * (interior + 0.5 * (err(0) + err(n - 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub uniform_covered: bool,
    pub pointwise_fraction: f64,
}

/// Band containment of the true psd at the Fourier frequencies.
pub fn coverage_flags<F: Fn(f64) -> f64>(estimate: &PsdEstimate, true_psd: F) -> Coverage {
    let inside = estimate
        .frequencies
        .iter()
        .zip(estimate.lower.iter().zip(&estimate.upper))
        .filter(|(lambda, (lo, hi))| {
            let f = true_psd(**lambda);
            **lo <= f && f <= **hi
        })
        .count();
    let total = estimate.len();
    Coverage {
        uniform_covered: inside == total,
        pointwise_fraction: inside as f64 / total as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn freqs(nu: usize) -> Vec<f64> {
        (1..=nu).map(|l| 2.0 * PI * l as f64 / (2 * nu + 1) as f64).collect()
    }

    fn samples(draws: &[Vec<f64>]) -> PosteriorSamples {
        PosteriorSamples::from_draws(draws, freqs(draws[0].len()), 1.0).unwrap()
    }

    #[test]
    fn median_examples() {
        let s = samples(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(pointwise_median(&s), vec![2.0, 5.0]);
        let s = samples(&[vec![1.0], vec![4.0]]);
        assert_eq!(pointwise_median(&s), vec![2.5]);
    }

    #[test]
    fn hand_computed_zeta() {
        // one frequency: draws 1, 2, 4, 10 → median 3, deviations 2, 1, 1, 7
        // → mad 1.5; second frequency: 2, 2, 3, 3 → median 2.5, mad 0.5
        let s = samples(&[vec![1.0, 2.0], vec![2.0, 2.0], vec![4.0, 3.0], vec![10.0, 3.0]]);
        let est = uniform_band(&s, 0.25).unwrap();
        assert_relative_eq!(est.median[0], 3.0);
        assert_relative_eq!(est.mad[0], 1.5);
        assert_relative_eq!(est.mad[1], 0.5);
        // per-draw maxima: 4/3, 1, 1, 14/3 → sorted 1, 1, 4/3, 14/3; rank ⌈0.75·4⌉ = 3
        assert_relative_eq!(est.zeta, 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(est.upper[0], 3.0 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn alpha_zero_contains_every_draw() {
        let draws: Vec<Vec<f64>> = (0..37)
            .map(|i| (0..6).map(|l| 1.0 + ((i * 7 + l * 3) % 11) as f64).collect())
            .collect();
        let s = samples(&draws);
        let est = uniform_band(&s, 0.0).unwrap();
        for d in &draws {
            for (l, x) in d.iter().enumerate() {
                assert!(est.lower[l] <= x + 1e-12 && *x <= est.upper[l] + 1e-12);
            }
        }
    }

    #[test]
    fn zero_mad_is_replaced() {
        let s = samples(&[vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 5.0]]);
        let est = uniform_band(&s, 0.1).unwrap();
        assert_eq!(est.mad[0], est.mad[1]);
        assert!(uniform_band(&samples(&[vec![1.0], vec![1.0]]), 0.1).is_err());
    }

    #[test]
    fn type_one_quantile() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9), 9.0);
        assert_eq!(empirical_quantile(&v, 0.91), 10.0);
        assert_eq!(empirical_quantile(&v, 1.0), 10.0);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 1.0 - 0.1), 90.0);
    }

    #[test]
    fn rescale_identity_and_linearity() {
        let s = samples(&[vec![1.0, 2.0], vec![2.0, 3.0], vec![4.0, 3.5]]);
        let est = uniform_band(&s, 0.1).unwrap();
        assert_eq!(rescale_to_original(&est, 1.0).unwrap(), est);
        let four = rescale_to_original(&est, 4.0).unwrap();
        for l in 0..2 {
            assert_relative_eq!(four.median[l], 4.0 * est.median[l]);
            assert_relative_eq!(four.upper[l], 4.0 * est.upper[l]);
        }
        assert_eq!(four.zeta, est.zeta);
        assert!(rescale_to_original(&est, 0.0).is_err());
    }

    fn flat_estimate(level: f64, freqs: Vec<f64>) -> PsdEstimate {
        let nu = freqs.len();
        PsdEstimate {
            frequencies: freqs,
            median: vec![level; nu],
            mad: vec![0.1; nu],
            lower: vec![level - 0.5; nu],
            upper: vec![level + 0.5; nu],
            zeta: 5.0,
            alpha: 0.1,
        }
    }

    #[test]
    fn iae_of_constant_offset() {
        let est = flat_estimate(2.0, freqs(20));
        assert!(iae(&est, |_| 2.0).abs() < 1e-15);
        assert_relative_eq!(iae(&est, |_| 1.75), 0.25 * PI, epsilon = 1e-10);
    }

    #[test]
    fn interpolation_is_flat_outside() {
        let xs = [1.0, 2.0];
        let ys = [3.0, 5.0];
        assert_eq!(interpolate(&xs, &ys, 0.0), 3.0);
        assert_eq!(interpolate(&xs, &ys, 1.5), 4.0);
        assert_eq!(interpolate(&xs, &ys, 9.0), 5.0);
    }

    #[test]
    fn coverage_counting() {
        let nu = 12;
        let est = flat_estimate(1.0, freqs(nu));
        let c = coverage_flags(&est, |_| 1.0);
        assert!(c.uniform_covered);
        assert_eq!(c.pointwise_fraction, 1.0);
        let spike = est.frequencies[4];
        let c = coverage_flags(&est, |l| if l == spike { 9.0 } else { 1.0 });
        assert!(!c.uniform_covered);
        assert_relative_eq!(c.pointwise_fraction, (nu - 1) as f64 / nu as f64);
        let mut thin = est.clone();
        thin.lower = thin.median.clone();
        thin.upper = thin.median.clone();
        assert_eq!(coverage_flags(&thin, |_| 1.3).pointwise_fraction, 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let est = flat_estimate(1.0, freqs(3));
        let mut out = Vec::new();
        est.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frequency,median,lower,upper");
        assert_eq!(lines.len(), 4);
    }
}
