//! Time series ingestion, preprocessing and the periodogram.
//!
//! Ordinates are computed at the Fourier frequencies `λ_l = 2πl/n` for
//! `l = 1, …, ⌊(n−1)/2⌋`. The zero frequency is dropped because the series is
//! mean-centred, and the Nyquist ordinate of an even-length series is never
//! reached by that index range.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Default minimum series length.
pub const MIN_LENGTH: usize = 8;

/// Raw observations, possibly with gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(values: Vec<Option<f64>>) -> Result<Self> {
        Self::with_min_length(values, MIN_LENGTH)
    }

    pub fn with_min_length(values: Vec<Option<f64>>, min_length: usize) -> Result<Self> {
        if values.len() < min_length {
            return Err(Error::DegenerateInput(format!(
                "series has {} observations, at least {} required",
                values.len(),
                min_length
            )));
        }
        if let Some(bad) = values.iter().flatten().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation {bad}")));
        }
        Ok(Self { values })
    }

    /// Series without gaps.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().copied().map(Some).collect())
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Reads one observation per line from the first CSV column. A leading
    /// non-numeric line is treated as a header; empty fields and `NA` are gaps.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        let reader = std::io::BufReader::new(reader);
        let mut lines = std::io::BufRead::lines(reader).enumerate().peekable();
        while let Some((line, text)) = lines.next() {
            let text = text?;
            // a trailing newline yields no extra observation
            if text.trim().is_empty() && lines.peek().is_none() {
                break;
            }
            let field = text.split(',').next().unwrap_or("").trim().trim_matches('"').trim();
            match parse_field(field) {
                Ok(v) => values.push(v),
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", line + 1))),
            }
        }
        Self::new(values)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }
}

fn parse_field(field: &str) -> std::result::Result<Option<f64>, String> {
    if field.is_empty() || field.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| format!("cannot parse {field:?} as a number"))
}

/// Gap-filled, centred and standardized series.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedSeries {
    pub values: Vec<f64>,
    pub original_mean: f64,
    pub original_sd: f64,
    pub sqrt_transformed: bool,
}

impl PreprocessedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Undoes the standardization, giving back the imputed (and possibly
    /// square-rooted) series.
    pub fn restore(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| self.original_sd * v + self.original_mean)
            .collect()
    }

    /// Factor converting a psd of the standardized series to original units.
    pub fn scale_factor(&self) -> f64 {
        self.original_sd * self.original_sd
    }
}

/// Optional square-root transform, mean imputation of gaps, then centring and
/// division by the sample standard deviation.
pub fn preprocess(raw: &TimeSeries, apply_sqrt: bool) -> Result<PreprocessedSeries> {
    let observed: Vec<f64> = raw.values.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(Error::DegenerateInput("all observations are missing".into()));
    }
    if observed.len() < 2 {
        return Err(Error::DegenerateInput(
            "at least two non-missing observations are required".into(),
        ));
    }
    if apply_sqrt {
        if let Some(neg) = observed.iter().find(|&&x| x < 0.0) {
            return Err(Error::Domain(format!(
                "square-root transform of negative observation {neg}"
            )));
        }
    }
    let transform = |x: f64| if apply_sqrt { x.sqrt() } else { x };
    let observed_mean = observed.iter().map(|&x| transform(x)).sum::<f64>() / observed.len() as f64;
    let filled: Vec<f64> = raw
        .values
        .iter()
        .map(|v| v.map(transform).unwrap_or(observed_mean))
        .collect();

    let n = filled.len() as f64;
    let mean = filled.iter().sum::<f64>() / n;
    let var = filled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateInput("series has zero variance after centring".into()));
    }
    Ok(PreprocessedSeries {
        values: filled.iter().map(|x| (x - mean) / sd).collect(),
        original_mean: mean,
        original_sd: sd,
        sqrt_transformed: apply_sqrt,
    })
}

/// Number of positive Fourier frequencies used, `⌊(n−1)/2⌋`.
pub fn fourier_count(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

/// Periodogram ordinates at the positive Fourier frequencies below Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Radian frequencies `2πl/n`, `l = 1..=ν`.
    pub frequencies: Vec<f64>,
    pub ordinates: Vec<f64>,
    /// Length of the underlying series.
    pub n: usize,
}

impl Periodogram {
    pub fn from_series(series: &PreprocessedSeries) -> Result<Self> {
        if series.len() < MIN_LENGTH {
            return Err(Error::DegenerateInput(format!(
                "periodogram needs at least {MIN_LENGTH} observations"
            )));
        }
        Self::from_values(&series.values)
    }

    /// FFT periodogram of an arbitrary real sequence with `ν ≥ 1`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let nu = fourier_count(n);
        if nu == 0 {
            return Err(Error::DegenerateInput(format!(
                "series of length {n} has no positive Fourier frequency"
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let norm = 1.0 / (2.0 * PI * n as f64);
        let ordinates = buf[1..=nu].iter().map(|c| c.norm_sqr() * norm).collect();
        Ok(Self {
            frequencies: fourier_frequencies(n),
            ordinates,
            n,
        })
    }

    /// Builds a periodogram directly from ordinates, assuming they sit at
    /// the Fourier frequencies of a series of length `n`.
    pub fn from_ordinates(ordinates: Vec<f64>, n: usize) -> Result<Self> {
        if ordinates.len() != fourier_count(n) || ordinates.is_empty() {
            return Err(Error::DegenerateInput(format!(
                "{} ordinates do not match a series of length {n}",
                ordinates.len()
            )));
        }
        if let Some(bad) = ordinates.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!("invalid periodogram ordinate {bad}")));
        }
        Ok(Self {
            frequencies: fourier_frequencies(n),
            ordinates,
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    /// Frequencies mapped to the unit interval, `ω_l = λ_l / π`.
    pub fn unit_frequencies(&self) -> Vec<f64> {
        self.frequencies.iter().map(|l| l / PI).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency", "ordinate"])?;
        for (f, i) in self.frequencies.iter().zip(&self.ordinates) {
            w.write_record([crate::format::g17(*f), crate::format::g17(*i)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fourier_frequencies(n: usize) -> Vec<f64> {
    (1..=fourier_count(n)).map(|l| 2.0 * PI * l as f64 / n as f64).collect()
}
