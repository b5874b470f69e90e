//! Exact samplers for the community-level quantities: the size-biased
//! total-affiliation draw, the community weight given its total affiliation,
//! their posterior counterparts given latent counts, and the atoms of the
//! slice-restricted zero-count CRM.

use rand::Rng as _;

use crate::crm::special::{upper_inc_gamma, GammaCdf};
use crate::crm::{laplace_exponent, tail_intensity, Hyperparams, QuadratureSettings, SIGMA_ZERO_EPS};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::samplers::tilted::{Tail, TiltedGamma};
use crate::samplers::{sample_dirichlet_sym, sample_gamma, sample_poisson};

/// A community: weight, total affiliation, and per-node affiliations summing
/// to `varsigma`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Community {
    pub r: f64,
    pub varsigma: f64,
    pub v: Vec<f64>,
}

/// Solve Gamma(a, x) = u * Gamma(a, x_lo) for x >= x_lo by safeguarded
/// Newton iteration (bisection fallback keeps the bracket valid).
///
/// Inverts the normalized upper tail of the density x^(a-1) e^-x restricted
/// to (x_lo, inf); valid for any a > -1 including nonpositive values where
/// no gamma-distribution inverse exists.
pub fn inv_upper_gamma_tail(a: f64, x_lo: f64, u: f64) -> f64 {
    debug_assert!(x_lo > 0.0 && (0.0..=1.0).contains(&u));
    let total = upper_inc_gamma(a, x_lo);
    let target = u * total;
    if !(target > 0.0) || !target.is_finite() {
        return x_lo;
    }
    let mut hi = x_lo + 1.0;
    while upper_inc_gamma(a, hi) > target {
        hi = hi * 2.0 + 1.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut lo = x_lo;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = upper_inc_gamma(a, x) - target;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
        // d/dx Gamma(a, x) = -x^(a-1) e^-x
        let slope = ((a - 1.0) * x.ln() - x).exp();
        let mut next = if slope > 0.0 { x + f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Draw R with density proportional to r^(-1-sigma0) e^(-c r) on (lower, inf).
pub fn sample_levy_tail(rng: &mut Rng, sigma0: f64, c: f64, lower: f64) -> f64 {
    debug_assert!(c > 0.0 && lower > 0.0);
    let u: f64 = rng.gen();
    inv_upper_gamma_tail(-sigma0, c * lower, u) / c
}

/// Size-biased draw of a community's total affiliation under the prior:
/// density proportional to psi(x^2) * Gamma(x; n alpha, beta).
pub fn sample_varsigma_prior(rng: &mut Rng, n: u64, theta: &Hyperparams) -> Result<f64> {
    let th = *theta;
    let tail = if th.is_finite_activity() {
        Tail::Bounded(th.total_mass())
    } else {
        // psi(t)/t is nonincreasing (psi concave with psi(0) = 0), so
        // psi(x^2) grows at most quadratically in x
        Tail::Quadratic
    };
    let mut sampler = TiltedGamma::new(
        n as f64 * th.alpha(),
        th.beta(),
        move |x| laplace_exponent(x * x, &th),
        true,
        tail,
        "varsigma_prior",
    )?;
    sampler.sample(rng)
}

/// Draw the community weight given its total affiliation: density
/// proportional to (1 - e^(-r t)) rho(r) with t = varsigma^2.
///
/// Rejection from a two-part envelope: (1 - e^-rt) <= rt on r < 1/t
/// (a truncated Gamma(1 - sigma0, tau) proposal) and <= 1 on r >= 1/t
/// (the Levy tail). Acceptance is at least 1 - 1/e.
pub fn sample_r_given_varsigma(rng: &mut Rng, varsigma: f64, theta: &Hyperparams) -> Result<f64> {
    let t = varsigma * varsigma;
    if !(t > 0.0) {
        return Err(Error::Domain {
            name: "varsigma",
            value: varsigma,
            reason: "must be positive",
        });
    }
    let s0 = theta.sigma0();
    let tau = theta.tau();
    let split = 1.0 / t;
    let body = GammaCdf::new(1.0 - s0, tau);
    let cdf_split = body.cdf(split);
    // mass of the r t rho(r) envelope below the split
    let mass_a = t * theta.kappa() * tau.powf(s0 - 1.0) * cdf_split;
    let mass_b = tail_intensity(split, theta)?;
    let total = mass_a + mass_b;
    for _ in 0..10_000 {
        let pick_a = rng.gen::<f64>() * total < mass_a;
        if pick_a {
            let p = rng.gen::<f64>() * cdf_split;
            let r = body.quantile(p.clamp(1e-300, 1.0 - 1e-16)).max(1e-300);
            let rt = r * t;
            // accept with (1 - e^-rt)/(rt)
            if rng.gen::<f64>() * rt < -(-rt).exp_m1() {
                return Ok(r);
            }
        } else {
            let r = sample_levy_tail(rng, s0, tau, split);
            if rng.gen::<f64>() < -(-r * t).exp_m1() {
                return Ok(r);
            }
        }
    }
    Err(Error::SamplerRetries {
        context: "r_given_varsigma",
        retries: 10_000,
    })
}

/// Minimum base shape for the reparametrized posterior affiliation draw;
/// below it the direct (bounded decreasing tilt) form is used instead.
const MIN_BOOSTED_SHAPE: f64 = 0.05;

/// Posterior draw of a community's total affiliation given its total latent
/// count d >= 1: density proportional to
/// x^(n alpha + 2 d - 1) e^(-beta x) (x^2 + tau)^(sigma0 - d).
pub fn sample_varsigma_posterior(
    rng: &mut Rng,
    d: u64,
    n: u64,
    theta: &Hyperparams,
) -> Result<f64> {
    debug_assert!(d >= 1);
    let s0 = theta.sigma0();
    let tau = theta.tau();
    let base_shape = n as f64 * theta.alpha() + 2.0 * s0;
    let power = d as f64 - s0;
    if base_shape > MIN_BOOSTED_SHAPE {
        // absorb x^(2 sigma0) into the base: tilt (x^2/(x^2+tau))^(d-sigma0),
        // increasing and bounded by 1
        let mut sampler = TiltedGamma::new(
            base_shape,
            theta.beta(),
            move |x| {
                let t = x * x;
                (power * (t.ln() - (t + tau).ln())).exp()
            },
            true,
            Tail::Bounded(1.0),
            "varsigma_posterior",
        )?;
        sampler.sample(rng)
    } else {
        // direct form: base Gamma(n alpha + 2 d, beta) with decreasing tilt
        // ((x^2+tau)/tau)^(sigma0 - d) <= 1. For large d the target
        // concentrates near sqrt(tau), far below the base distribution's
        // bulk, and the envelope's acceptance can collapse; the sampler then
        // reports SamplerRetries rather than degrade. Reachable only in the
        // extreme corner n alpha + 2 sigma0 <= 0.05 with d >~ 10.
        let mut sampler = TiltedGamma::new(
            n as f64 * theta.alpha() + 2.0 * d as f64,
            theta.beta(),
            move |x| (-power * ((x * x + tau).ln() - tau.ln())).exp(),
            false,
            Tail::Bounded(1.0),
            "varsigma_posterior_direct",
        )?;
        sampler.sample(rng)
    }
}

/// Posterior draw of the community weight given total count d and total
/// affiliation: Gamma(d - sigma0, varsigma^2 + tau).
pub fn sample_r_posterior(rng: &mut Rng, d: u64, varsigma: f64, theta: &Hyperparams) -> f64 {
    debug_assert!(d >= 1);
    sample_gamma(
        rng,
        d as f64 - theta.sigma0(),
        varsigma * varsigma + theta.tau(),
    )
}

/// Draw the atoms of the zero-count CRM restricted to weights in
/// (lo, hi); `hi = inf` gives the usual slice-restricted draw above `lo`.
///
/// Factorized exactly: the atom count above lo is Poisson with the tail mass
/// mean, each atom's affiliation total comes from the conditional density
/// proportional to (x^2+tau)^sigma0 UpperGamma(-sigma0, (x^2+tau) lo) times
/// Gamma(x; n alpha, beta), and its weight from the Levy tail with rate
/// tau + varsigma^2 above lo. Only the hi cutoff is enforced by thinning.
pub fn sample_inhomogeneous_crm(
    rng: &mut Rng,
    lo: f64,
    hi: f64,
    n: u64,
    theta: &Hyperparams,
) -> Result<Vec<Community>> {
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Domain {
            name: "lo",
            value: lo,
            reason: "need 0 < lo < hi",
        });
    }
    let s0 = theta.sigma0();
    let sigma_eff = if s0.abs() < SIGMA_ZERO_EPS { 0.0 } else { s0 };
    let tau = theta.tau();
    let q = QuadratureSettings::default();
    let mean_atoms = crate::crm::psi_prime(lo, n, theta, &q)?;
    if !mean_atoms.is_finite() {
        return Err(Error::Invariant(format!(
            "inhomogeneous CRM atom count mean not finite: {mean_atoms}"
        )));
    }
    let n_prop = sample_poisson(rng, mean_atoms);
    if n_prop == 0 {
        return Ok(Vec::new());
    }
    // the conditional affiliation tilt t^sigma0 UpperGamma(-sigma0, t lo)
    // with t = x^2 + tau is decreasing in x: its t-derivative is
    // -t^(sigma0 - 1) UpperGamma(1 - sigma0, t lo) < 0 by the incomplete
    // gamma recurrence. Normalize by the value at x = 0 so the tilt is <= 1.
    let ln_w0 = sigma_eff * tau.ln() + upper_inc_gamma(-sigma_eff, tau * lo).ln();
    let tilt = move |x: f64| {
        let t = x * x + tau;
        (sigma_eff * t.ln() + upper_inc_gamma(-sigma_eff, t * lo).ln() - ln_w0).exp()
    };
    let mut varsigma_sampler = TiltedGamma::new(
        n as f64 * theta.alpha(),
        theta.beta(),
        tilt,
        false,
        Tail::Bounded(1.0),
        "crm_varsigma",
    )?;
    let mut atoms = Vec::new();
    for _ in 0..n_prop {
        let varsigma = varsigma_sampler.sample(rng)?;
        let r = sample_levy_tail(rng, sigma_eff, tau + varsigma * varsigma, lo);
        if r >= hi {
            continue;
        }
        let phi = sample_dirichlet_sym(rng, theta.alpha(), n as usize);
        let v = phi.iter().map(|&p| p * varsigma).collect();
        atoms.push(Community { r, varsigma, v });
    }
    Ok(atoms)
}
