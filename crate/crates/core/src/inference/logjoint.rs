//! Diagnostic log joint density of the chain state, recomputed from scratch:
//! hyperprior + restricted-CRM term + latent-count and slice terms.
//! Returns negative infinity when a state invariant is violated.

use statrs::function::gamma::ln_gamma;

use crate::crm::{psi_n, psi_prime, QuadratureSettings};

use super::{EntryKind, HyperPriors, McmcState};

fn gamma_lpdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x
}

pub fn log_joint(state: &McmcState, priors: &HyperPriors, q: &QuadratureSettings) -> f64 {
    let th = &state.theta;
    let n = state.n;
    let s_min = state.slices.s_min;

    // invariant guards (debug aid): weights above the slice, weighted
    // conservation
    for c in state.ensemble.iter() {
        if c.r < s_min {
            return f64::NEG_INFINITY;
        }
    }
    for e in &state.tracked {
        if let EntryKind::Weighted(b) = e.kind {
            let total: u64 = state.latent.entry(e.pair).iter().map(|&(_, c)| c).sum();
            if total != b {
                return f64::NEG_INFINITY;
            }
        }
    }

    // hyperprior on the transformed parameters
    let mut lj = gamma_lpdf(1.0 - priors.sigma_rep * th.sigma0(), priors.a, priors.b)
        + gamma_lpdf(th.kappa(), priors.a, priors.b)
        + gamma_lpdf(th.tau(), priors.a, priors.b)
        + gamma_lpdf(th.alpha(), priors.a, priors.b);

    // restricted-CRM term
    let psi = match psi_n(n as u64, th, q) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let psi_p = match psi_prime(s_min, n as u64, th, q) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    lj -= psi + psi_p;
    for c in state.ensemble.iter() {
        lj += th.log_levy_density(c.r);
        for &v in &c.v {
            lj += th.log_affiliation_density(v);
        }
    }

    // latent counts (active communities only) and slice densities
    for e in &state.tracked {
        let parts = state.latent.entry(e.pair);
        if parts.is_empty() {
            continue; // Unif(0,1) slice: zero log density
        }
        let (i, j) = e.pair;
        let mult = if !state.directed && i != j { 2.0 } else { 1.0 };
        let mut min_r = f64::INFINITY;
        for &(k, c) in parts {
            let com = state.ensemble.get(k);
            let p = mult * com.r * com.v[i as usize] * com.v[j as usize];
            lj += c as f64 * p.ln() - p - ln_gamma(c as f64 + 1.0);
            min_r = min_r.min(com.r);
        }
        lj -= min_r.ln(); // Unif(0, min r) slice density
    }
    if lj.is_nan() {
        return f64::NEG_INFINITY;
    }
    lj
}
