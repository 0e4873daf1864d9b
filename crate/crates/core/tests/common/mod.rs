//! Independent oracles and reusable property checks for the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use pspline_psd::model::{v_to_w, w_to_v, whittle_log_likelihood, LatentVector, PriorConfig, Weights};
use pspline_psd::penalty::{
    derivative_gram, derivative_penalty, difference_penalty, max_abs_column_sum, DifferenceMatrix,
};
use pspline_psd::sampler::{
    delta_conditional, phi_conditional, tau_conditional, update_delta, update_phi, update_tau, update_v, PilotSummary,
    SamplerState,
};
use pspline_psd::signal::Periodogram;
use pspline_psd::splines::KnotVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // absolute tolerance, floored at roundoff of the running estimate
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * (left + right).abs()) {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Integrates over `[a, b]` splitting at `breaks` (integrands smooth between
/// them).
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| adaptive_simpson(f, w[0], w[1], tol))
        .sum()
}

/// Textbook recursive Cox–de Boor evaluation of `B_{k,r}` on a full knot
/// vector, with the last basis function closed at the right end.
pub fn naive_bspline(t: &[f64], k: usize, r: usize, x: f64) -> f64 {
    if r == 0 {
        let last = t[t.len() - 1];
        if t[k] <= x && (x < t[k + 1] || (x == last && t[k + 1] == last && t[k] < last)) {
            return 1.0;
        }
        return 0.0;
    }
    let mut out = 0.0;
    let d1 = t[k + r] - t[k];
    if d1 > 0.0 {
        out += (x - t[k]) / d1 * naive_bspline(t, k, r - 1, x);
    }
    let d2 = t[k + r + 1] - t[k + 1];
    if d2 > 0.0 {
        out += (t[k + r + 1] - x) / d2 * naive_bspline(t, k + 1, r - 1, x);
    }
    out
}

/// `d`-th derivative of `B_{k,r}` by the standard derivative recursion.
pub fn naive_bspline_derivative(t: &[f64], k: usize, r: usize, d: usize, x: f64) -> f64 {
    if d == 0 {
        return naive_bspline(t, k, r, x);
    }
    let rf = r as f64;
    let mut out = 0.0;
    let d1 = t[k + r] - t[k];
    if d1 > 0.0 {
        out += rf / d1 * naive_bspline_derivative(t, k, r - 1, d - 1, x);
    }
    let d2 = t[k + r + 1] - t[k + 1];
    if d2 > 0.0 {
        out -= rf / d2 * naive_bspline_derivative(t, k + 1, r - 1, d - 1, x);
    }
    out
}

/// Autocovariances `γ_0..γ_p` of a causal AR(p) process from the
/// Yule–Walker equations.
pub fn yule_walker_autocov(rho: &[f64], sigma2: f64) -> Vec<f64> {
    let p = rho.len();
    let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut b = DVector::<f64>::zeros(p + 1);
    b[0] = sigma2;
    for k in 0..=p {
        a[(k, k)] += 1.0;
        for j in 1..=p {
            let lag = (k as isize - j as isize).unsigned_abs();
            a[(k, lag)] -= rho[j - 1];
        }
    }
    a.lu()
        .solve(&b)
        .expect("Yule-Walker system is regular")
        .iter()
        .copied()
        .collect()
}

/// `|Σ Y_t e^{−itλ_l}|²/(2πn)` by direct summation.
pub fn direct_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nu = (n - 1) / 2;
    (1..=nu)
        .map(|l| {
            let lambda = 2.0 * PI * l as f64 / n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                re += v * (t as f64 * lambda).cos();
                im -= v * (t as f64 * lambda).sin();
            }
            (re * re + im * im) / (2.0 * PI * n as f64)
        })
        .collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the mean of an autocorrelated sequence by
/// non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Geweke z-score comparing the first 10% with the last 50%.
pub fn geweke_z(x: &[f64]) -> f64 {
    let n = x.len();
    let a = &x[..n / 10];
    let b = &x[n / 2..];
    let sa = batch_means_se(a, 10);
    let sb = batch_means_se(b, 20);
    (mean(a) - mean(b)) / (sa * sa + sb * sb).sqrt()
}

/// Strictly increasing internal knots on `[0, 1]` from positive gaps.
pub fn knots_from_gaps(gaps: &[f64]) -> Vec<f64> {
    let total: f64 = gaps.iter().sum();
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for g in &gaps[..gaps.len() - 1] {
        acc += g / total;
        out.push(acc);
    }
    out.push(1.0);
    out
}

// ---- property checks returning the worst deviation or a failure message

/// Largest `|Σ_k B_k(ω) − 1|` over the given points.
pub fn partition_of_unity_error(kv: &KnotVector, omegas: &[f64]) -> f64 {
    omegas
        .iter()
        .map(|&w| (kv.basis(w).unwrap().iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Largest `|∫ b_k − 1|` over all densities, by adaptive Simpson.
pub fn density_integral_error(kv: &KnotVector) -> f64 {
    let breaks = kv.internal().to_vec();
    (0..kv.n_basis())
        .map(|k| {
            let f = |w: f64| kv.density(w, k).unwrap();
            (piecewise_simpson(&f, &breaks, 1e-13) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether `D₁` kills constants and `D₂` kills ramps exactly.
pub fn differences_annihilate(n_basis: usize) -> bool {
    let d1 = DifferenceMatrix::new(n_basis, 1).unwrap();
    let ones = DVector::from_element(n_basis - 1, 3i64);
    let first = (d1.entries() * ones).iter().all(|&x| x == 0);
    if n_basis < 4 {
        return first;
    }
    let d2 = DifferenceMatrix::new(n_basis, 2).unwrap();
    let ramp = DVector::from_fn(n_basis - 1, |i, _| 2 * i as i64 - 5);
    first && (d2.entries() * ramp).iter().all(|&x| x == 0)
}

/// Smallest eigenvalue of `P` minus `ε` (non-negative when `P ⪰ εI`).
pub fn penalty_eigen_margin(p: &DMatrix<f64>, eps: f64) -> f64 {
    p.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        - eps
}

pub fn difference_penalty_margin(n_basis: usize, d: usize, eps: f64) -> f64 {
    let p = difference_penalty(n_basis, d, eps).unwrap();
    penalty_eigen_margin(p.entries(), eps)
}

/// Largest absolute difference between the Gram matrix and the adaptive
/// quadrature of naive B-spline derivative products.
pub fn gram_oracle_error(kv: &KnotVector, d: usize) -> f64 {
    let gram = derivative_gram(kv, d).unwrap();
    let t = kv.knots();
    let r = kv.degree();
    let breaks = kv.internal().to_vec();
    let k = kv.n_basis();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in i..k {
            let f = |w: f64| naive_bspline_derivative(t, i, r, d, w) * naive_bspline_derivative(t, j, r, d, w);
            let scale = gram[(i, i)].abs().max(gram[(j, j)].abs()).max(1.0);
            let want = piecewise_simpson(&f, &breaks, 1e-11 * scale);
            worst = worst.max((gram[(i, j)] - want).abs() / scale);
        }
    }
    worst
}

/// Max absolute column sum of the normalized Gram matrix.
pub fn normalized_gram_column_sum(kv: &KnotVector, d: usize) -> f64 {
    let gram = derivative_gram(kv, d).unwrap();
    max_abs_column_sum(&(&gram / max_abs_column_sum(&gram)))
}

pub fn derivative_penalty_margin(kv: &KnotVector, d: usize, eps: f64) -> f64 {
    let p = derivative_penalty(kv, d, eps).unwrap();
    // Gram restrictions are PSD, so the ridge bounds the spectrum from below.
    penalty_eigen_margin(p.entries(), eps) / eps
}

/// `max |v − w_to_v(v_to_w(v))|`.
pub fn round_trip_error(v: &[f64]) -> f64 {
    let w = v_to_w(&LatentVector(v.to_vec()));
    let back = w_to_v(&w).unwrap();
    v.iter().zip(&back.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `max |w − v_to_w(w_to_v(w))|`.
pub fn weight_round_trip_error(w: &[f64]) -> f64 {
    let v = w_to_v(&Weights::new(w.to_vec()).unwrap()).unwrap();
    let back = v_to_w(&v);
    w.iter().zip(&back.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Relative gap between the Whittle log-likelihood and the sum of
/// exponential log-densities `log(exp(−I/f)/f)`.
pub fn whittle_vs_exponential(pgram: &Periodogram, psd: &[f64]) -> f64 {
    let ll = whittle_log_likelihood(pgram, psd).unwrap();
    let oracle: f64 = pgram
        .ordinates
        .iter()
        .zip(psd)
        .map(|(i, f)| ((-i / f).exp() / f).ln())
        .sum();
    (ll - oracle).abs() / oracle.abs().max(1.0)
}

/// Q-spaced knots: strictly increasing, fixed endpoints, unchanged by
/// rescaling the periodogram.
pub fn qspaced_check(pgram: &Periodogram, n_basis: usize, scale: f64) -> Result<(), String> {
    let kv = KnotVector::qspaced(pgram, n_basis, 3).map_err(|e| e.to_string())?;
    let internal = kv.internal();
    if internal[0] != 0.0 || *internal.last().unwrap() != 1.0 {
        return Err(format!("endpoints moved: {internal:?}"));
    }
    if internal.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
        return Err(format!("not strictly increasing: {internal:?}"));
    }
    let scaled = Periodogram::from_ordinates(pgram.ordinates.iter().map(|x| x * scale).collect(), pgram.n).unwrap();
    let other = KnotVector::qspaced(&scaled, n_basis, 3).map_err(|e| e.to_string())?;
    let worst = internal
        .iter()
        .zip(other.internal())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(format!("scale changed knots by {worst:e}"));
    }
    Ok(())
}

// ---- Monte Carlo checks of the sampler kernels

pub fn sampler_state(v: Vec<f64>, phi: f64, delta: f64) -> SamplerState {
    let dim = v.len();
    SamplerState {
        v,
        phi,
        delta,
        tau: 1.0,
        beta: vec![0.0; dim],
        sigma: 1.0,
    }
}

fn within_3se(what: &str, draws: &[f64], want: f64, sd: f64) -> Result<(), String> {
    let se = sd / (draws.len() as f64).sqrt();
    let got = mean(draws);
    if (got - want).abs() <= 3.0 * se {
        Ok(())
    } else {
        Err(format!("{what}: mean {got} vs {want} (se {se})"))
    }
}

/// Means of `draws` φ, δ and τ conditional draws against their analytic
/// Gamma and inverse-Gamma means.
pub fn conjugate_means_check(draws: usize, seed: u64) -> Result<(), String> {
    let prior = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let pen = difference_penalty(5, 1, 1e-6).unwrap();
    // D₁ v = (1, −1, 0) so vᵀPv = 2 up to the ridge
    let s = sampler_state(vec![0.0, 1.0, 0.0, 0.0], 1.0, 1.0);
    let (shape, rate) = phi_conditional(&s, &pen, &prior);
    if (shape - 3.0).abs() > 1e-15 || (rate - 2.0).abs() > 1e-5 {
        return Err(format!("phi conditional ({shape}, {rate}) vs (3, 2)"));
    }
    let x: Vec<f64> = (0..draws).map(|_| update_phi(&s, &pen, &prior, &mut rng)).collect();
    within_3se("phi", &x, shape / rate, shape.sqrt() / rate)?;

    let s = sampler_state(vec![0.0; 3], 2.0, 1.0);
    let (shape, rate) = delta_conditional(&s, &prior);
    if (shape - 1.0001).abs() > 1e-15 || (rate - 2.0001).abs() > 1e-15 {
        return Err(format!("delta conditional ({shape}, {rate}) vs (1.0001, 2.0001)"));
    }
    let x: Vec<f64> = (0..draws).map(|_| update_delta(&s, &prior, &mut rng)).collect();
    within_3se("delta", &x, shape / rate, shape.sqrt() / rate)?;

    let ords: Vec<f64> = (0..20).map(|l| 0.5 + (l % 7) as f64 * 0.3).collect();
    let mixture: Vec<f64> = (0..20).map(|l| 0.8 + (l % 3) as f64 * 0.2).collect();
    let (shape, scale) = tau_conditional(&ords, &mixture, &prior).unwrap();
    let x: Vec<f64> = (0..draws)
        .map(|_| update_tau(&ords, &mixture, &prior, &mut rng).unwrap())
        .collect();
    let sd = scale / ((shape - 1.0) * (shape - 2.0).sqrt());
    within_3se("tau", &x, scale / (shape - 1.0), sd)?;
    // the reciprocal is Gamma(shape, rate = scale)
    let inv: Vec<f64> = x.iter().map(|t| 1.0 / t).collect();
    within_3se("1/tau", &inv, shape / scale, shape.sqrt() / scale)
}

/// A deliberately imperfect pilot: rotated and mis-scaled.
pub fn skewed_pilot(seed: u64) -> PilotSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            vec![0.5 + z[0], -1.0 + 0.8 * z[0] + z[1], 0.3 * z[2] - 0.2 * z[1]]
        })
        .collect();
    PilotSummary::from_draws(&draws).unwrap()
}

/// Runs `update_v` against a known 3-D Gaussian and compares the first two
/// moments of `draws` sweeps with batch-means standard errors.
pub fn gaussian_kernel_check(pilot: &PilotSummary, sigma: f64, draws: usize, seed: u64) -> Result<(), String> {
    let mu = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, -0.3, 0.6, 2.0, 0.4, -0.3, 0.4, 0.5]);
    let prec = cov.clone().try_inverse().unwrap();
    let mut target = |v: &[f64]| {
        let x = DVector::from_column_slice(v) - &mu;
        -0.5 * x.dot(&(&prec * &x))
    };
    let mut s = sampler_state(vec![0.0; 3], 1.0, 1.0);
    s.beta = pilot.to_beta(&s.v);
    s.sigma = sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..2_000 {
        update_v(&mut s, pilot, &mut target, &mut rng);
    }
    let mut xs: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        update_v(&mut s, pilot, &mut target, &mut rng);
        for (i, x) in xs.iter_mut().enumerate() {
            x.push(s.v[i]);
        }
    }
    // v and S^{1/2}β + v̄ stay in step
    let back = pilot.to_v(&s.beta);
    if back
        .iter()
        .zip(&s.v)
        .any(|(a, b)| (a - b).abs() > 1e-10 * (1.0 + a.abs()))
    {
        return Err("v drifted from its whitened coordinates".into());
    }
    for i in 0..3 {
        let se = batch_means_se(&xs[i], 100);
        let m = mean(&xs[i]);
        if (m - mu[i]).abs() > 3.0 * se {
            return Err(format!("mean[{i}] {m} vs {} (se {se})", mu[i]));
        }
        for j in i..3 {
            let prod: Vec<f64> = xs[i]
                .iter()
                .zip(&xs[j])
                .map(|(a, b)| (a - mu[i]) * (b - mu[j]))
                .collect();
            let se = batch_means_se(&prod, 100);
            let c = mean(&prod);
            if (c - cov[(i, j)]).abs() > 3.0 * se {
                return Err(format!("cov[{i},{j}] {c} vs {} (se {se})", cov[(i, j)]));
            }
        }
    }
    Ok(())
}
