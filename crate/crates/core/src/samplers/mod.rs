//! Random variate generation: gamma draws that stay accurate at very small
//! shapes, Dirichlet vectors, zero-truncated Poisson and binomial variates,
//! and categorical/multinomial helpers in log space.

pub mod crm_atoms;
pub mod tilted;

use rand::distributions::Distribution;
use rand::Rng as _;
use rand_distr::{Binomial, Gamma as GammaSampler, Poisson};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Shape below which the shape-boosting representation is used; the standard
/// rejection samplers lose mass to underflow there.
const SMALL_SHAPE: f64 = 0.15;

/// Floor for log-space gamma draws, so downstream sums of logs stay finite.
const LN_FLOOR: f64 = -650.0;

/// Draw ln(X) with X ~ Gamma(shape, rate).
///
/// For small shapes uses X = Y * U^(1/shape) with Y ~ Gamma(shape + 1, rate),
/// computed in log space so values like exp(-500) survive.
pub fn sample_gamma_ln(rng: &mut Rng, shape: f64, rate: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0);
    if shape >= SMALL_SHAPE {
        let g = GammaSampler::new(shape, 1.0 / rate).expect("valid gamma");
        let x: f64 = g.sample(rng);
        x.ln().max(LN_FLOOR)
    } else {
        let g = GammaSampler::new(shape + 1.0, 1.0 / rate).expect("valid gamma");
        let y: f64 = g.sample(rng);
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        (y.ln() + u.ln() / shape).max(LN_FLOOR)
    }
}

/// Draw X ~ Gamma(shape, rate); strictly positive even for tiny shapes.
pub fn sample_gamma(rng: &mut Rng, shape: f64, rate: f64) -> f64 {
    sample_gamma_ln(rng, shape, rate).exp()
}

/// Symmetric Dirichlet(alpha, ..., alpha) in `dim` dimensions, normalized in
/// log space so small alphas cannot produce a 0/0 vector.
pub fn sample_dirichlet_sym(rng: &mut Rng, alpha: f64, dim: usize) -> Vec<f64> {
    debug_assert!(dim >= 1);
    let logs: Vec<f64> = (0..dim).map(|_| sample_gamma_ln(rng, alpha, 1.0)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Dirichlet with per-coordinate concentrations, normalized in log space.
pub fn sample_dirichlet(rng: &mut Rng, alphas: &[f64]) -> Vec<f64> {
    debug_assert!(!alphas.is_empty());
    let logs: Vec<f64> = alphas
        .iter()
        .map(|&a| sample_gamma_ln(rng, a, 1.0))
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Poisson draw; exact for lambda = 0.
pub fn sample_poisson(rng: &mut Rng, lambda: f64) -> u64 {
    debug_assert!(lambda >= 0.0 && lambda.is_finite());
    if lambda == 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("lambda > 0").sample(rng) as u64
}

/// Zero-truncated Poisson: K >= 1 with P(K = k) proportional to lambda^k / k!.
///
/// Uses the first-arrival decomposition: conditionally on at least one arrival
/// in [0, lambda], the first arrival time T has CDF (1 - e^-t)/(1 - e^-lambda)
/// and the remaining count is Poisson(lambda - T).
pub fn sample_truncated_poisson(rng: &mut Rng, lambda: f64) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            reason: "truncated Poisson rate must be finite and > 0",
        });
    }
    let u: f64 = rng.gen();
    // t = -ln(1 - u (1 - e^-lambda)), always in (0, lambda]
    let t = -(u * (-lambda).exp_m1()).ln_1p();
    Ok(1 + sample_poisson(rng, (lambda - t).max(0.0)))
}

/// Zero-truncated Binomial(n, p): K >= 1.
///
/// When zeros are rare, plain rejection; otherwise sequential inversion over
/// k = 1, 2, ... with the pmf ratio recurrence.
pub fn sample_truncated_binomial(rng: &mut Rng, n: u64, p: f64) -> Result<u64> {
    if n < 1 {
        return Err(Error::Config("truncated binomial needs n >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            reason: "truncated binomial needs 0 < p < 1",
        });
    }
    let log_q0 = n as f64 * (-p).ln_1p();
    if log_q0 < -0.6931 {
        // P(K = 0) < 0.5: rejection terminates in about two tries
        let b = Binomial::new(n, p).expect("valid binomial");
        loop {
            let k = b.sample(rng);
            if k >= 1 {
                return Ok(k);
            }
        }
    }
    let q0 = log_q0.exp();
    let mut u: f64 = rng.gen::<f64>() * (1.0 - q0);
    // pmf ratio: q_{k+1}/q_k = (n-k)/(k+1) * p/(1-p)
    let ratio = p / (1.0 - p);
    let mut qk = n as f64 * p * ((n - 1) as f64 * (-p).ln_1p()).exp();
    for k in 1..=n {
        if u < qk || k == n {
            return Ok(k);
        }
        u -= qk;
        qk *= (n - k) as f64 / (k + 1) as f64 * ratio;
    }
    Ok(n)
}

/// Sample an index proportionally to exp(log_w[i]).
pub fn sample_categorical_log(rng: &mut Rng, log_w: &[f64]) -> usize {
    debug_assert!(!log_w.is_empty());
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(m.is_finite(), "all categorical weights are zero");
    let weights: Vec<f64> = log_w.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    log_w.len() - 1
}

/// Multinomial(n, probs) by the conditional-binomial method.
pub fn sample_multinomial(rng: &mut Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    debug_assert!(!probs.is_empty());
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || p >= mass {
            out[i] = remaining;
            break;
        }
        let frac = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, frac).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}
