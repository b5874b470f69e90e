//! Hyperparameter Metropolis-Hastings: lognormal random walks on
//! (1 - 2*sigma0) [or (1 - 4*sigma0)], kappa, tau, alpha, and optionally
//! beta, with Gamma(0.1, 0.1) priors and burn-in-only scale adaptation.

use statrs::function::gamma::ln_gamma;

use crate::crm::{psi_n, psi_prime, Hyperparams, QuadratureSettings};
use crate::error::{Error, Result};
use crate::generative::CommunityEnsemble;
use crate::rng::Rng;

use super::McmcState;

pub const N_PARAMS: usize = 5; // sigma0, kappa, tau, alpha, beta

const ADAPT_WINDOW: u64 = 50;
const TARGET_LOW: f64 = 0.2;
const TARGET_HIGH: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct HyperPriors {
    pub a: f64,
    pub b: f64,
    /// reparameterization slope: the prior sits on 1 - rep * sigma0
    pub sigma_rep: f64,
}

impl HyperPriors {
    pub fn for_cap(sigma0_max: f64) -> Result<Self> {
        if sigma0_max != 0.5 && sigma0_max != 0.25 {
            return Err(Error::Config(
                "sigma0_max must be 0.5 or 0.25".into(),
            ));
        }
        Ok(Self {
            a: 0.1,
            b: 0.1,
            sigma_rep: 1.0 / sigma0_max,
        })
    }
}

/// Per-parameter proposal scales and acceptance bookkeeping.
#[derive(Debug, Clone)]
pub struct MhState {
    pub scales: [f64; N_PARAMS],
    pub adapting: bool,
    pub update_beta: bool,
    accepts: [u64; N_PARAMS],
    attempts: [u64; N_PARAMS],
}

impl MhState {
    pub fn new(scale: f64, update_beta: bool) -> Self {
        Self {
            scales: [scale; N_PARAMS],
            adapting: true,
            update_beta,
            accepts: [0; N_PARAMS],
            attempts: [0; N_PARAMS],
        }
    }

    fn record(&mut self, idx: usize, accepted: bool) {
        self.attempts[idx] += 1;
        if accepted {
            self.accepts[idx] += 1;
        }
        if self.adapting && self.attempts[idx] >= ADAPT_WINDOW {
            let rate = self.accepts[idx] as f64 / self.attempts[idx] as f64;
            if rate < TARGET_LOW {
                self.scales[idx] *= 0.7;
            } else if rate > TARGET_HIGH {
                self.scales[idx] *= 1.4;
            }
            self.scales[idx] = self.scales[idx].clamp(1e-4, 10.0);
            self.accepts[idx] = 0;
            self.attempts[idx] = 0;
        }
    }
}

/// Sufficient statistics of the slice-extended atom set for the density
/// ratio: atom count, sums of log r and r, and sums of log v and v over all
/// affiliation coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct AtomStats {
    pub t: f64,
    pub sum_ln_r: f64,
    pub sum_r: f64,
    pub sum_ln_v: f64,
    pub sum_v: f64,
}

pub fn suff_stats(ensemble: &CommunityEnsemble) -> AtomStats {
    let mut s = AtomStats::default();
    for c in ensemble.iter() {
        s.t += 1.0;
        s.sum_ln_r += c.r.ln();
        s.sum_r += c.r;
        for &v in &c.v {
            s.sum_ln_v += v.ln();
            s.sum_v += v;
        }
    }
    s
}

/// Sum over atoms of log levy density plus log affiliation densities,
/// written in terms of the sufficient statistics.
pub fn log_mu_total(theta: &Hyperparams, stats: &AtomStats, n: usize) -> f64 {
    let s0 = theta.sigma0();
    stats.t * (theta.kappa().ln() - ln_gamma(1.0 - s0))
        - (1.0 + s0) * stats.sum_ln_r
        - theta.tau() * stats.sum_r
        + n as f64 * stats.t * (theta.alpha() * theta.beta().ln() - ln_gamma(theta.alpha()))
        + (theta.alpha() - 1.0) * stats.sum_ln_v
        - theta.beta() * stats.sum_v
}

fn get_transformed(theta: &Hyperparams, idx: usize, rep: f64) -> f64 {
    match idx {
        0 => 1.0 - rep * theta.sigma0(),
        1 => theta.kappa(),
        2 => theta.tau(),
        3 => theta.alpha(),
        _ => theta.beta(),
    }
}

fn with_transformed(theta: &Hyperparams, idx: usize, rep: f64, x: f64) -> Result<Hyperparams> {
    let (mut kappa, mut sigma0, mut tau, mut alpha, mut beta) = (
        theta.kappa(),
        theta.sigma0(),
        theta.tau(),
        theta.alpha(),
        theta.beta(),
    );
    match idx {
        0 => sigma0 = (1.0 - x) / rep,
        1 => kappa = x,
        2 => tau = x,
        3 => alpha = x,
        _ => beta = x,
    }
    Hyperparams::new(kappa, sigma0, tau, alpha, beta)
}

fn psi_sum(
    theta: &Hyperparams,
    n: usize,
    s_min: f64,
    q: &QuadratureSettings,
) -> Result<f64> {
    Ok(psi_n(n as u64, theta, q)? + psi_prime(s_min, n as u64, theta, q)?)
}

/// One round of per-parameter MH updates. `include_psi = false` drops the
/// Psi terms (prior-only runs with an empty atom set).
#[allow(clippy::too_many_arguments)]
pub fn update_hyperparameters_core(
    theta: &mut Hyperparams,
    ensemble: &CommunityEnsemble,
    n: usize,
    s_min: f64,
    mh: &mut MhState,
    priors: &HyperPriors,
    include_psi: bool,
    rng: &mut Rng,
    q: &QuadratureSettings,
) -> Result<()> {
    let stats = suff_stats(ensemble);
    let mut cur_psi = if include_psi {
        psi_sum(theta, n, s_min, q)?
    } else {
        0.0
    };
    let mut cur_mu = log_mu_total(theta, &stats, n);
    let n_updates = if mh.update_beta { N_PARAMS } else { N_PARAMS - 1 };
    for idx in 0..n_updates {
        let x = get_transformed(theta, idx, priors.sigma_rep);
        let step: f64 = mh.scales[idx] * rand::Rng::sample::<f64, _>(rng, rand_distr::StandardNormal);
        let x_new = x * step.exp();
        let proposal = match with_transformed(theta, idx, priors.sigma_rep, x_new) {
            Ok(t) => t,
            Err(_) => {
                mh.record(idx, false);
                continue;
            }
        };
        let new_psi = if include_psi {
            match psi_sum(&proposal, n, s_min, q) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("warning: hyperparameter proposal rejected ({e})");
                    mh.record(idx, false);
                    continue;
                }
            }
        } else {
            0.0
        };
        let new_mu = log_mu_total(&proposal, &stats, n);
        let log_accept = priors.a * (x_new / x).ln() - priors.b * (x_new - x)
            + (cur_psi - new_psi)
            + (new_mu - cur_mu);
        let u: f64 = rand::Rng::gen::<f64>(rng).max(f64::MIN_POSITIVE);
        let accepted = u.ln() < log_accept;
        if accepted {
            *theta = proposal;
            cur_psi = new_psi;
            cur_mu = new_mu;
        }
        mh.record(idx, accepted);
    }
    Ok(())
}

/// Step 2 of the sweep.
pub fn update_hyperparameters(
    state: &mut McmcState,
    mh: &mut MhState,
    priors: &HyperPriors,
    rng: &mut Rng,
    q: &QuadratureSettings,
) -> Result<()> {
    let mut theta = state.theta.clone();
    update_hyperparameters_core(
        &mut theta,
        &state.ensemble,
        state.n,
        state.slices.s_min,
        mh,
        priors,
        true,
        rng,
        q,
    )?;
    state.theta = theta;
    Ok(())
}
