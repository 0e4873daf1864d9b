//! Clamped knot vectors, B-spline bases and B-spline densities on `[0, 1]`.
//!
//! Indices are zero-based: basis function `k` (for `k = 0..K`) is supported on
//! `[t[k], t[k + r + 1]]`, where `t` is the full knot vector of length
//! `K + r + 1` with `r + 1` copies of each boundary knot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Periodogram;

/// Default spline degree (cubic).
pub const DEFAULT_DEGREE: usize = 3;

/// Minimum spacing enforced between neighbouring internal knots.
pub const MIN_KNOT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Clamps a strictly increasing internal knot sequence that starts at 0
    /// and ends at 1.
    pub fn from_internal(internal: &[f64], degree: usize) -> Result<Self> {
        if internal.len() < 2 {
            return Err(Error::InvalidKnots(format!(
                "need at least 2 internal knots, got {}",
                internal.len()
            )));
        }
        if internal[0] != 0.0 || internal[internal.len() - 1] != 1.0 {
            return Err(Error::InvalidKnots(
                "internal knots must start at 0 and end at 1".into(),
            ));
        }
        if internal.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidKnots("internal knots must be strictly increasing".into()));
        }
        let mut knots = Vec::with_capacity(internal.len() + 2 * degree);
        knots.extend(std::iter::repeat_n(0.0, degree));
        knots.extend_from_slice(internal);
        knots.extend(std::iter::repeat_n(1.0, degree));
        Ok(Self { knots, degree })
    }

    /// `K − r + 1` equally spaced internal knots.
    pub fn equidistant(n_basis: usize, degree: usize) -> Result<Self> {
        let n_internal = internal_count(n_basis, degree)?;
        let last = (n_internal - 1) as f64;
        let internal: Vec<f64> = (0..n_internal)
            .map(|j| if j + 1 == n_internal { 1.0 } else { j as f64 / last })
            .collect();
        Self::from_internal(&internal, degree)
    }

    /// Internal knots at quantiles of a cdf built from the standardized
    /// square-root periodogram. Falls back to equidistant knots when the
    /// periodogram is flat.
    pub fn qspaced(pgram: &Periodogram, n_basis: usize, degree: usize) -> Result<Self> {
        let n_internal = internal_count(n_basis, degree)?;
        if pgram.len() < 2 {
            return Err(Error::InvalidKnots(
                "quantile knots need at least two periodogram ordinates".into(),
            ));
        }
        if let Some(bad) = pgram.ordinates.iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::Domain(format!("negative periodogram ordinate {bad}")));
        }
        let grid = pgram.unit_frequencies();
        match periodogram_cdf(&pgram.ordinates) {
            Some(cdf) => {
                let mut internal = quantile_knots(&grid, &cdf, n_internal);
                enforce_min_gap(&mut internal, MIN_KNOT_GAP)?;
                Self::from_internal(&internal, degree)
            }
            None => {
                log::warn!("flat periodogram carries no placement information; using equidistant knots");
                Self::equidistant(n_basis, degree)
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `K`.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Full clamped knot vector (length `K + r + 1`).
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Internal knots `t[r..=K]`, including the endpoints 0 and 1.
    pub fn internal(&self) -> &[f64] {
        &self.knots[self.degree..=self.n_basis()]
    }

    /// Support `[t[k], t[k + r + 1]]` of basis function `k`.
    pub fn support(&self, k: usize) -> (f64, f64) {
        (self.knots[k], self.knots[k + self.degree + 1])
    }

    /// Index `μ` of the knot interval `[t[μ], t[μ+1])` holding `omega`; the
    /// right endpoint belongs to the last non-empty interval.
    pub fn span(&self, omega: f64) -> usize {
        let k = self.n_basis();
        if omega >= 1.0 {
            return k - 1;
        }
        let pos = self.knots.partition_point(|&t| t <= omega);
        (pos - 1).clamp(self.degree, k - 1)
    }

    /// Values of all `K` basis functions `B_{k,r}(ω)` by the Cox–de Boor
    /// recursion, taking `0/0 = 0`.
    pub fn basis(&self, omega: f64) -> Result<Vec<f64>> {
        check_unit(omega)?;
        Ok(self.basis_of_degree(omega, self.degree))
    }

    fn basis_of_degree(&self, omega: f64, p: usize) -> Vec<f64> {
        let t = &self.knots;
        let mu = self.span(omega);
        let n0 = t.len() - 1;
        let mut b = vec![0.0; n0];
        b[mu] = 1.0;
        for q in 1..=p {
            for j in 0..(n0 - q) {
                let left = ratio(omega - t[j], t[j + q] - t[j]);
                let right = ratio(omega - t[j + 1], t[j + q + 1] - t[j + 1]);
                b[j] = left * b[j] + (1.0 - right) * b[j + 1];
            }
            b.pop();
        }
        b
    }

    /// `d`-th derivatives of all `K` basis functions at `omega`.
    pub fn basis_derivative(&self, omega: f64, d: usize) -> Result<Vec<f64>> {
        check_unit(omega)?;
        if d > self.degree {
            return Err(Error::InvalidPenalty(format!(
                "derivative order {d} exceeds degree {}",
                self.degree
            )));
        }
        let t = &self.knots;
        let mut b = self.basis_of_degree(omega, self.degree - d);
        for p in (self.degree - d + 1)..=self.degree {
            let pf = p as f64;
            let next: Vec<f64> = (0..b.len() - 1)
                .map(|j| pf * (ratio(b[j], t[j + p] - t[j]) - ratio(b[j + 1], t[j + p + 1] - t[j + 1])))
                .collect();
            b = next;
        }
        Ok(b)
    }

    /// Normalizing factor `(r + 1) / (t[k + r + 1] − t[k])` turning `B_k`
    /// into a density.
    pub fn density_scale(&self, k: usize) -> Result<f64> {
        if k >= self.n_basis() {
            return Err(Error::InvalidKnots(format!(
                "basis index {k} out of range for K = {}",
                self.n_basis()
            )));
        }
        let (a, b) = self.support(k);
        let width = b - a;
        if !(width > 0.0) {
            return Err(Error::InvalidKnots(format!("basis {k} has zero-width support")));
        }
        Ok((self.degree + 1) as f64 / width)
    }

    /// B-spline density `b_{k,r}(ω)`.
    pub fn density(&self, omega: f64, k: usize) -> Result<f64> {
        let scale = self.density_scale(k)?;
        Ok(scale * self.basis(omega)?[k])
    }

    /// All `K` densities at `omega`.
    pub fn densities(&self, omega: f64) -> Result<Vec<f64>> {
        let mut b = self.basis(omega)?;
        for (k, v) in b.iter_mut().enumerate() {
            *v *= self.density_scale(k)?;
        }
        Ok(b)
    }

    /// `d`-th derivatives of all `K` densities at `omega`.
    pub fn density_derivative(&self, omega: f64, d: usize) -> Result<Vec<f64>> {
        let mut b = self.basis_derivative(omega, d)?;
        for (k, v) in b.iter_mut().enumerate() {
            *v *= self.density_scale(k)?;
        }
        Ok(b)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.knots)?)
    }

    /// Parses a full clamped knot vector; the degree is the multiplicity of
    /// the leading zero minus one.
    pub fn from_json(text: &str) -> Result<Self> {
        let knots: Vec<f64> = serde_json::from_str(text)?;
        let lead = knots.iter().take_while(|&&x| x == 0.0).count();
        let trail = knots.iter().rev().take_while(|&&x| x == 1.0).count();
        if lead == 0 || lead != trail {
            return Err(Error::InvalidKnots(
                "knot vector must be clamped with equal multiplicity at 0 and 1".into(),
            ));
        }
        let degree = lead - 1;
        let inner = &knots[degree..knots.len() - degree];
        Self::from_internal(inner, degree)
    }
}

fn internal_count(n_basis: usize, degree: usize) -> Result<usize> {
    if n_basis < degree + 1 {
        return Err(Error::InvalidKnots(format!(
            "K = {n_basis} is below r + 1 = {}",
            degree + 1
        )));
    }
    Ok(n_basis - degree + 1)
}

fn check_unit(omega: f64) -> Result<()> {
    if (0.0..=1.0).contains(&omega) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{omega} lies outside [0, 1]")))
    }
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Cumulative sums `Z_l` of the normalized absolute standardized square-root
/// ordinates, or `None` when the square-root periodogram has zero spread.
fn periodogram_cdf(ordinates: &[f64]) -> Option<Vec<f64>> {
    let x: Vec<f64> = ordinates.iter().map(|v| v.sqrt()).collect();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 1e-12 * mean.abs()) {
        return None;
    }
    let y: Vec<f64> = x.iter().map(|v| ((v - mean) / sd).abs()).collect();
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut acc = 0.0;
    let mut z: Vec<f64> = y
        .iter()
        .map(|v| {
            acc += v / total;
            acc
        })
        .collect();
    if let Some(last) = z.last_mut() {
        *last = 1.0;
    }
    Some(z)
}

/// Inverts the piecewise-linear cdf through `(0,0)`, `(grid_l, cdf_l)` and
/// `(1,1)` at `n_internal` equally spaced levels. Flat stretches map to their
/// midpoint; levels 0 and 1 map to the endpoints.
fn quantile_knots(grid: &[f64], cdf: &[f64], n_internal: usize) -> Vec<f64> {
    let mut xs = Vec::with_capacity(grid.len() + 2);
    let mut fs = Vec::with_capacity(grid.len() + 2);
    xs.push(0.0);
    fs.push(0.0);
    xs.extend_from_slice(grid);
    fs.extend_from_slice(cdf);
    xs.push(1.0);
    fs.push(1.0);

    let last = (n_internal - 1) as f64;
    (0..n_internal)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j + 1 == n_internal {
                1.0
            } else {
                inverse_piecewise_linear(&xs, &fs, j as f64 / last)
            }
        })
        .collect()
}

pub(crate) fn inverse_piecewise_linear(xs: &[f64], fs: &[f64], q: f64) -> f64 {
    // Lowest x with F(x) >= q.
    let i = fs.partition_point(|&f| f < q);
    let lo = if i == 0 {
        xs[0]
    } else if fs[i] == q {
        xs[i]
    } else {
        let s = (q - fs[i - 1]) / (fs[i] - fs[i - 1]);
        xs[i - 1] + s * (xs[i] - xs[i - 1])
    };
    // Highest x with F(x) <= q.
    let j = fs.partition_point(|&f| f <= q);
    let hi = if j == fs.len() {
        xs[fs.len() - 1]
    } else if j == 0 {
        xs[0]
    } else if fs[j - 1] == q {
        xs[j - 1]
    } else {
        let s = (q - fs[j - 1]) / (fs[j] - fs[j - 1]);
        xs[j - 1] + s * (xs[j] - xs[j - 1])
    };
    0.5 * (lo + hi)
}

/// Pushes interior knots apart so neighbours differ by at least `gap`,
/// keeping the endpoints at 0 and 1.
fn enforce_min_gap(knots: &mut [f64], gap: f64) -> Result<()> {
    let m = knots.len();
    if (m - 1) as f64 * gap >= 1.0 {
        return Err(Error::InvalidKnots(format!(
            "{m} knots cannot be separated by {gap} on [0, 1]"
        )));
    }
    for j in 1..m - 1 {
        knots[j] = knots[j].max(knots[j - 1] + gap);
    }
    for j in (1..m - 1).rev() {
        knots[j] = knots[j].min(knots[j + 1] - gap);
    }
    Ok(())
}

/// B-spline densities evaluated at the Fourier frequencies, computed once
/// per fit.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    values: Vec<f64>,
    grid: Vec<f64>,
    n_basis: usize,
    /// First column that can be non-zero in each row; at most `r + 1`
    /// consecutive columns are.
    first: Vec<usize>,
    band: usize,
}

impl BasisMatrix {
    pub fn new(kv: &KnotVector, pgram: &Periodogram) -> Result<Self> {
        Self::on_grid(kv, &pgram.unit_frequencies())
    }

    /// Densities at arbitrary points of `[0, 1]`.
    pub fn on_grid(kv: &KnotVector, grid: &[f64]) -> Result<Self> {
        let k = kv.n_basis();
        let r = kv.degree();
        let mut values = Vec::with_capacity(grid.len() * k);
        let mut first = Vec::with_capacity(grid.len());
        for &omega in grid {
            values.extend(kv.densities(omega)?);
            first.push(kv.span(omega) - r);
        }
        Ok(Self {
            values,
            grid: grid.to_vec(),
            n_basis: k,
            first,
            band: r + 1,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_basis + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_basis..(row + 1) * self.n_basis]
    }

    /// Column range that holds every non-zero entry of `row`.
    pub fn band(&self, row: usize) -> std::ops::Range<usize> {
        let start = self.first[row];
        start..(start + self.band).min(self.n_basis)
    }

    /// Mixture `Σ_k w_k b_k` at every grid point, written into `out`.
    pub fn mixture_into(&self, weights: &[f64], out: &mut [f64]) {
        debug_assert_eq!(weights.len(), self.n_basis);
        for (l, o) in out.iter_mut().enumerate() {
            let range = self.band(l);
            let row = &self.values[l * self.n_basis..];
            *o = range.map(|k| row[k] * weights[k]).sum();
        }
    }

    pub fn mixture(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        self.mixture_into(weights, &mut out);
        out
    }
}
