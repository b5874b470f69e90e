//! Deterministic numerics of the generalized gamma process (GGP) with
//! gamma-distributed affiliations: Laplace exponent, tail intensity, the
//! moment integrals of the Levy measure, and the one-dimensional reductions
//! of the community-count means.

pub mod quadrature;
pub mod special;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
pub use quadrature::QuadratureSettings;
use special::upper_inc_gamma;

/// Threshold below which |sigma0| is treated as exactly zero and the
/// logarithmic limits are used; avoids cancellation in (x^s - y^s)/s.
pub const SIGMA_ZERO_EPS: f64 = 1e-10;

/// Parameters of the GGP Levy measure and the gamma affiliation distribution.
///
/// The Levy density is kappa / Gamma(1 - sigma0) * r^(-1-sigma0) * exp(-tau r)
/// and affiliations are Gamma(alpha, beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    kappa: f64,
    sigma0: f64,
    tau: f64,
    alpha: f64,
    beta: f64,
}

impl Hyperparams {
    pub fn new(kappa: f64, sigma0: f64, tau: f64, alpha: f64, beta: f64) -> Result<Self> {
        let positive = |name: &'static str, value: f64| -> Result<()> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value,
                    reason: "must be finite and > 0",
                })
            }
        };
        positive("kappa", kappa)?;
        positive("tau", tau)?;
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        if !(sigma0 < 1.0) || !sigma0.is_finite() {
            return Err(Error::Domain {
                name: "sigma0",
                value: sigma0,
                reason: "must be finite and < 1",
            });
        }
        Ok(Self {
            kappa,
            sigma0,
            tau,
            alpha,
            beta,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Regular-variation index sigma = max(0, sigma0) of the tail intensity.
    pub fn sigma(&self) -> f64 {
        self.sigma0.max(0.0)
    }

    /// Mean affiliation m_f = alpha / beta.
    pub fn mean_affiliation(&self) -> f64 {
        self.alpha / self.beta
    }

    /// True when the Levy measure is finite (sigma0 < 0); the total mass is
    /// then kappa * tau^sigma0 / (-sigma0).
    pub fn is_finite_activity(&self) -> bool {
        self.sigma0 < -SIGMA_ZERO_EPS
    }

    /// Total Levy mass for the finite-activity case, infinite otherwise.
    pub fn total_mass(&self) -> f64 {
        if self.is_finite_activity() {
            -self.kappa * self.tau.powf(self.sigma0) / self.sigma0
        } else {
            f64::INFINITY
        }
    }

    /// Log of the Levy density at r > 0.
    pub fn log_levy_density(&self, r: f64) -> f64 {
        self.kappa.ln() - ln_gamma(1.0 - self.sigma0) + (-1.0 - self.sigma0) * r.ln()
            - self.tau * r
    }

    /// Log of the Gamma(alpha, beta) affiliation density at v > 0.
    pub fn log_affiliation_density(&self, v: f64) -> f64 {
        self.alpha * self.beta.ln() - ln_gamma(self.alpha) + (self.alpha - 1.0) * v.ln()
            - self.beta * v
    }
}

/// Laplace exponent psi(t) = integral of (1 - e^{-rt}) against the Levy
/// measure; closed form (kappa/sigma0)((t+tau)^sigma0 - tau^sigma0) with the
/// logarithmic limit at sigma0 = 0.
pub fn laplace_exponent(t: f64, theta: &Hyperparams) -> f64 {
    debug_assert!(t >= 0.0);
    let s = theta.sigma0;
    if s.abs() < SIGMA_ZERO_EPS {
        theta.kappa * ((t + theta.tau).ln() - theta.tau.ln())
    } else {
        theta.kappa / s * ((t + theta.tau).powf(s) - theta.tau.powf(s))
    }
}

/// Tail Levy intensity: expected number of weights exceeding x.
pub fn tail_intensity(x: f64, theta: &Hyperparams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            reason: "tail intensity requires x > 0",
        });
    }
    let s = theta.sigma0;
    if s.abs() < SIGMA_ZERO_EPS {
        Ok(theta.kappa * special::exp_integral_e1(theta.tau * x))
    } else {
        Ok(theta.kappa * theta.tau.powf(s) * upper_inc_gamma(-s, theta.tau * x)
            / ln_gamma(1.0 - s).exp())
    }
}

/// Moment integral varkappa(m, t) = ∫ r^m e^{-rt} ρ(r) dr, m >= 1.
pub fn varkappa(m: u64, t: f64, theta: &Hyperparams) -> f64 {
    debug_assert!(m >= 1);
    let s = theta.sigma0;
    let mf = m as f64;
    theta.kappa
        * (ln_gamma(mf - s) - ln_gamma(1.0 - s) + (s - mf) * (t + theta.tau).ln()).exp()
}

/// Integration window, in log-sigma space, covering essentially all of the
/// Gamma(n*alpha, beta) mass with slack for slowly varying tilts.
fn log_sigma_window(n: u64, theta: &Hyperparams) -> (f64, f64) {
    let shape = n as f64 * theta.alpha;
    let dist = special::GammaCdf::new(shape, theta.beta);
    let lo = dist.quantile(1e-13).max(f64::MIN_POSITIVE);
    let hi = dist.quantile(1.0 - 1e-13);
    (lo.ln() - 3.0, hi.ln() + 0.7)
}

fn log_gamma_density_at_exp(y: f64, shape: f64, rate: f64) -> f64 {
    // density of Gamma(shape, rate) at exp(y), times the Jacobian exp(y)
    shape * rate.ln() - ln_gamma(shape) + shape * y - rate * y.exp()
}

/// Mean number of active communities: Psi(n) = E[psi(V^2)] with
/// V ~ Gamma(n*alpha, beta), evaluated by adaptive quadrature in log space.
pub fn psi_n(n: u64, theta: &Hyperparams, q: &QuadratureSettings) -> Result<f64> {
    debug_assert!(n >= 1);
    let shape = n as f64 * theta.alpha;
    let rate = theta.beta;
    let (y_lo, y_hi) = log_sigma_window(n, theta);
    let f = |y: f64| {
        let varsigma = y.exp();
        laplace_exponent(varsigma * varsigma, theta)
            * log_gamma_density_at_exp(y, shape, rate).exp()
    };
    quadrature::integrate(f, y_lo, y_hi, q, "psi_n")
}

/// Mean number of atoms of the zero-count posterior CRM with weight above
/// `s_min`: the slice-restricted mass integral.
pub fn psi_prime(
    s_min: f64,
    n: u64,
    theta: &Hyperparams,
    q: &QuadratureSettings,
) -> Result<f64> {
    if !(s_min > 0.0) {
        return Err(Error::Domain {
            name: "s_min",
            value: s_min,
            reason: "slice threshold must be > 0",
        });
    }
    let s = theta.sigma0;
    let shape = n as f64 * theta.alpha;
    let rate = theta.beta;
    let (y_lo, y_hi) = log_sigma_window(n, theta);
    let sigma_eff = if s.abs() < SIGMA_ZERO_EPS { 0.0 } else { s };
    let prefactor = theta.kappa / ln_gamma(1.0 - sigma_eff).exp();
    let f = |y: f64| {
        let varsigma = y.exp();
        let t = theta.tau + varsigma * varsigma;
        let tail = upper_inc_gamma(-sigma_eff, t * s_min);
        if tail == 0.0 {
            return 0.0;
        }
        t.powf(sigma_eff) * tail * log_gamma_density_at_exp(y, shape, rate).exp()
    };
    Ok(prefactor * quadrature::integrate(f, y_lo, y_hi, q, "psi_prime")?)
}
