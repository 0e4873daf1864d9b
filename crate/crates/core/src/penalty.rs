//! Roughness penalties for the Gaussian prior on the log-ratio weights.
//!
//! Equidistant knots use `P = DᵀD + εI` with `D` the `d`-th order difference
//! matrix. Unequal knots use the Gram matrix of `d`-th derivatives of the
//! B-spline basis functions, scaled by its maximum absolute column sum,
//! restricted to the first `K − 1` coordinates and ridged by `εI`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::splines::KnotVector;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// `(K − 1 − d) × (K − 1)` integer difference operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    entries: DMatrix<i64>,
    order: usize,
}

impl DifferenceMatrix {
    pub fn new(n_basis: usize, order: usize) -> Result<Self> {
        if order < 1 || order + 2 > n_basis {
            return Err(Error::InvalidPenalty(format!(
                "difference order {order} must lie in 1..={} for K = {n_basis}",
                n_basis.saturating_sub(2)
            )));
        }
        let cols = n_basis - 1;
        let mut entries = DMatrix::<i64>::identity(cols, cols);
        for _ in 0..order {
            entries = first_difference(entries.nrows()) * entries;
        }
        Ok(Self { entries, order })
    }

    pub fn entries(&self) -> &DMatrix<i64> {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(|x| x as f64)
    }
}

fn first_difference(m: usize) -> DMatrix<i64> {
    DMatrix::from_fn(m - 1, m, |i, j| {
        if j == i {
            -1
        } else if j == i + 1 {
            1
        } else {
            0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Difference,
    Derivative,
}

/// Symmetric positive-definite precision structure of the weight prior.
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    entries: DMatrix<f64>,
    epsilon: f64,
    kind: PenaltyKind,
    log_det: f64,
}

impl PenaltyMatrix {
    fn from_entries(entries: DMatrix<f64>, epsilon: f64, kind: PenaltyKind) -> Result<Self> {
        let chol = entries
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidPenalty("penalty matrix is not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            entries,
            epsilon,
            kind,
            log_det,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// `log det P`, from the Cholesky factor.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `vᵀPv`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        let mut total = 0.0;
        for j in 0..n {
            let col = self.entries.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * v[i];
            }
            total += s * v[j];
        }
        total
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.entries.row_iter() {
            w.write_record(row.iter().map(|x| crate::format::g17(*x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `P = DᵀD + εI_{K−1}`.
pub fn difference_penalty(n_basis: usize, order: usize, epsilon: f64) -> Result<PenaltyMatrix> {
    check_epsilon(epsilon)?;
    let d = DifferenceMatrix::new(n_basis, order)?.to_f64();
    let mut p = d.transpose() * d;
    for i in 0..p.nrows() {
        p[(i, i)] += epsilon;
    }
    PenaltyMatrix::from_entries(p, epsilon, PenaltyKind::Difference)
}

/// Derivative-based penalty for arbitrary (strictly increasing) knots.
pub fn derivative_penalty(kv: &KnotVector, order: usize, epsilon: f64) -> Result<PenaltyMatrix> {
    check_epsilon(epsilon)?;
    let mut gram = derivative_gram(kv, order)?;
    let scale = max_abs_column_sum(&gram);
    if !(scale > 0.0) {
        return Err(Error::InvalidPenalty("derivative Gram matrix vanishes".into()));
    }
    gram /= scale;
    let m = kv.n_basis() - 1;
    let mut p = gram.view((0, 0), (m, m)).into_owned();
    for i in 0..m {
        p[(i, i)] += epsilon;
    }
    PenaltyMatrix::from_entries(p, epsilon, PenaltyKind::Derivative)
}

/// `K × K` matrix of `∫₀¹ B_j^{(d)} B_k^{(d)} dω` over the unnormalized
/// B-spline basis, integrated exactly by Gauss–Legendre on each knot span.
/// The basis sums to one, so constant coefficient vectors lie in the null
/// space.
pub fn derivative_gram(kv: &KnotVector, order: usize) -> Result<DMatrix<f64>> {
    let r = kv.degree();
    if order < 1 || order > r {
        return Err(Error::InvalidPenalty(format!(
            "derivative order {order} must lie in 1..={r}"
        )));
    }
    let internal = kv.internal();
    if internal.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPenalty("knots have zero gaps".into()));
    }
    let k = kv.n_basis();
    // integrand has degree 2(r − d) on each span
    let nodes_needed = (2 * (r - order) + 1).div_ceil(2).max(1);
    let (nodes, weights) = gauss_legendre(nodes_needed);
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for span in internal.windows(2) {
        let (a, b) = (span[0], span[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter().zip(&weights) {
            let d = DVector::from_vec(kv.basis_derivative(mid + half * x, order)?);
            gram.ger(w * half, &d, &d, 1.0);
        }
    }
    Ok(gram)
}

pub fn max_abs_column_sum(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidPenalty(format!("ridge {epsilon} must be positive")))
    }
}
