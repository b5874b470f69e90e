//! Exact sampling from densities proportional to w(x) * Gamma(x; shape, rate)
//! with a monotone tilt w, by rejection from a piecewise-constant envelope.
//!
//! The envelope partitions the gamma quantile range into log-spaced cells and
//! bounds w on each cell by its value at the monotone endpoint. Proposals
//! within a cell are truncated gamma draws via inverse-CDF, so the scheme is
//! exact. The two tails are covered by a constant bound or, for tilts growing
//! at most quadratically, by an x^2-tilted gamma proposal.

use rand::Rng as _;

use crate::crm::special::GammaCdf;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Bound on the tilt over the upper tail (beyond the top quantile).
#[derive(Debug, Clone, Copy)]
pub enum Tail {
    /// w(x) <= c on the tail.
    Bounded(f64),
    /// w(x) <= w(hi) * (x / hi)^2 on the tail. Valid whenever w(t)/t^2 is
    /// nonincreasing, e.g. for w(x) = psi(x^2) by concavity of psi.
    Quadratic,
}

struct Cell {
    p_lo: f64,
    p_hi: f64,
    sup_w: f64,
    mass: f64,
}

pub struct TiltedGamma<W: Fn(f64) -> f64> {
    dist: GammaCdf,
    boost: Option<GammaCdf>, // Gamma(shape + 2, rate) for the quadratic tail
    w: W,
    increasing: bool,
    tail: Tail,
    cells: Vec<Cell>,
    // tail proposal bookkeeping
    hi: f64,
    tail_mass: f64,
    tail_coeff: f64,
    boost_cdf_hi: f64,
    context: &'static str,
}

const MAX_TRIES_PER_ROUND: usize = 2_000;
const MAX_CELLS: usize = 16_384;

impl<W: Fn(f64) -> f64> TiltedGamma<W> {
    /// Build the envelope. `w` must be monotone on (0, inf) and finite at the
    /// quantile endpoints; `increasing` states its direction.
    pub fn new(
        shape: f64,
        rate: f64,
        w: W,
        increasing: bool,
        tail: Tail,
        context: &'static str,
    ) -> Result<Self> {
        if !(shape > 0.0) || !(rate > 0.0) {
            return Err(Error::Domain {
                name: "shape/rate",
                value: shape.min(rate),
                reason: "tilted gamma needs positive shape and rate",
            });
        }
        let dist = GammaCdf::new(shape, rate);
        let boost = if matches!(tail, Tail::Quadratic) {
            Some(GammaCdf::new(shape + 2.0, rate))
        } else {
            None
        };
        let mut s = Self {
            dist,
            boost,
            w,
            increasing,
            tail,
            cells: Vec::new(),
            hi: 0.0,
            tail_mass: 0.0,
            tail_coeff: 0.0,
            boost_cdf_hi: 0.0,
            context,
        };
        s.build(64)?;
        Ok(s)
    }

    fn build(&mut self, n_cells: usize) -> Result<()> {
        let lo = self.dist.quantile(1e-9).max(1e-300);
        let hi = self.dist.quantile(1.0 - 1e-9).max(lo * 2.0);
        self.hi = hi;
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let mut cells = Vec::with_capacity(n_cells + 1);
        // lower tail cell (0, lo): for increasing w the sup is w(lo); for
        // decreasing w it is the limit at 0, which the tilts used here attain
        // continuously, so evaluate essentially at zero.
        let low_sup = if self.increasing {
            (self.w)(lo)
        } else {
            (self.w)(1e-300)
        };
        let f_lo = self.dist.cdf(lo);
        if f_lo > 0.0 && low_sup > 0.0 {
            cells.push(Cell {
                p_lo: 0.0,
                p_hi: f_lo,
                sup_w: low_sup,
                mass: low_sup * f_lo,
            });
        }
        let mut prev_x = lo;
        let mut prev_p = f_lo;
        for i in 1..=n_cells {
            let x = (ln_lo + (ln_hi - ln_lo) * i as f64 / n_cells as f64).exp();
            let p = if i == n_cells { 1.0 - 1e-9 } else { self.dist.cdf(x) };
            let sup = if self.increasing {
                (self.w)(x)
            } else {
                (self.w)(prev_x)
            };
            let dp = (p - prev_p).max(0.0);
            if dp > 0.0 && sup > 0.0 {
                cells.push(Cell {
                    p_lo: prev_p,
                    p_hi: p,
                    sup_w: sup,
                    mass: sup * dp,
                });
            }
            prev_x = x;
            prev_p = p;
        }
        // upper tail
        match self.tail {
            Tail::Bounded(c) => {
                self.tail_mass = c * (1.0 - prev_p).max(0.0);
            }
            Tail::Quadratic => {
                let boost = self.boost.as_ref().expect("quadratic tail has boost");
                self.boost_cdf_hi = boost.cdf(hi);
                let shape = self.dist.shape;
                let rate = self.dist.rate;
                // integral of x^2 f_{shape,rate}(x) over (hi, inf)
                let second_moment_tail =
                    shape * (shape + 1.0) / (rate * rate) * (1.0 - self.boost_cdf_hi);
                self.tail_coeff = (self.w)(hi) / (hi * hi);
                self.tail_mass = self.tail_coeff * second_moment_tail;
            }
        }
        if !self.tail_mass.is_finite() {
            return Err(Error::Invariant(format!(
                "tilted gamma tail mass is not finite in {}",
                self.context
            )));
        }
        self.cells = cells;
        let body: f64 = self.cells.iter().map(|c| c.mass).sum();
        if !(body + self.tail_mass > 0.0) {
            return Err(Error::Invariant(format!(
                "tilted gamma envelope has zero mass in {}",
                self.context
            )));
        }
        Ok(())
    }

    /// Total envelope mass; upper bound on the unnormalized target mass
    /// E[w(X)] under Gamma(shape, rate).
    pub fn envelope_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum::<f64>() + self.tail_mass
    }

    fn propose(&self, rng: &mut Rng) -> (f64, f64) {
        // returns (x, envelope bound on w at x)
        let total = self.envelope_mass();
        let mut u = rng.gen::<f64>() * total;
        for c in &self.cells {
            if u < c.mass {
                let p = c.p_lo + rng.gen::<f64>() * (c.p_hi - c.p_lo);
                let x = self.dist.quantile(p.clamp(1e-300, 1.0 - 1e-16));
                return (x.max(1e-300), c.sup_w);
            }
            u -= c.mass;
        }
        match self.tail {
            Tail::Bounded(c) => {
                let p_hi = self.dist.cdf(self.hi);
                let p = p_hi + rng.gen::<f64>() * (1.0 - p_hi);
                let x = self.dist.quantile(p.clamp(1e-300, 1.0 - 1e-16));
                (x.max(self.hi), c)
            }
            Tail::Quadratic => {
                let boost = self.boost.as_ref().expect("quadratic tail has boost");
                let p = self.boost_cdf_hi + rng.gen::<f64>() * (1.0 - self.boost_cdf_hi);
                let x = boost.quantile(p.clamp(1e-300, 1.0 - 1e-16)).max(self.hi);
                (x, self.tail_coeff * x * x)
            }
        }
    }

    /// Draw one exact sample.
    pub fn sample(&mut self, rng: &mut Rng) -> Result<f64> {
        loop {
            for _ in 0..MAX_TRIES_PER_ROUND {
                let (x, bound) = self.propose(rng);
                let wx = (self.w)(x);
                debug_assert!(
                    wx <= bound * (1.0 + 1e-9) + 1e-300,
                    "tilt exceeds envelope in {}: w({x}) = {wx} > {bound}",
                    self.context
                );
                if rng.gen::<f64>() * bound < wx {
                    return Ok(x);
                }
            }
            // acceptance collapsed: refine the grid and try again
            let next = (self.cells.len().max(64)) * 4;
            if next > MAX_CELLS {
                return Err(Error::SamplerRetries {
                    context: self.context,
                    retries: MAX_TRIES_PER_ROUND,
                });
            }
            self.build(next)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crm::quadrature::{self, QuadratureSettings};
    use crate::rng::stream;
    use statrs::function::gamma::ln_gamma;

    // chunked so narrow bumps inside the wide window are never missed
    fn chunked_integral(dens: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> f64 {
        let mut peak = 0.0f64;
        let mut y = a;
        while y < b {
            peak = peak.max(dens(y));
            y += 0.25;
        }
        let q = QuadratureSettings {
            rel_tol: 1e-10,
            abs_tol: (peak * 1e-13).max(1e-300),
            max_subdivisions: 400,
        };
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = (lo + 2.0).min(b);
            total += quadrature::integrate(dens, lo, hi, &q, "test").unwrap();
            lo = hi;
        }
        total
    }

    fn numeric_cdf(
        w: impl Fn(f64) -> f64 + Copy,
        shape: f64,
        rate: f64,
        xs: &[f64],
    ) -> Vec<f64> {
        let log_norm = shape * rate.ln() - ln_gamma(shape);
        let dens = move |y: f64| {
            // integrate in log space
            let x = y.exp();
            w(x) * (log_norm + shape * y - rate * x).exp()
        };
        let lo = xs[0].ln() - 8.0;
        let total = chunked_integral(dens, lo, xs[xs.len() - 1].ln() + 6.0);
        xs.iter()
            .map(|&x| chunked_integral(dens, lo, x.ln()) / total)
            .collect()
    }

    fn check_against_numeric_cdf(
        mut sampler: TiltedGamma<impl Fn(f64) -> f64>,
        w: impl Fn(f64) -> f64 + Copy,
        shape: f64,
        rate: f64,
        seed: u64,
    ) {
        let mut rng = stream(seed, 0);
        let n = 8000;
        let mut data: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).unwrap()).collect();
        data.sort_by(f64::total_cmp);
        // evaluate the numeric CDF on a subsample of order statistics
        let idx: Vec<usize> = (0..80).map(|i| i * n / 80 + n / 160).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| data[i]).collect();
        let cdfs = numeric_cdf(w, shape, rate, &xs);
        let mut d = 0.0f64;
        for (&i, &f) in idx.iter().zip(&cdfs) {
            let emp = (i as f64 + 0.5) / n as f64;
            d = d.max((emp - f).abs());
        }
        // KS-style bound at coarse grid resolution
        assert!(d < 0.025, "max CDF deviation {d}");
    }

    #[test]
    fn increasing_bounded_tilt() {
        let w = |x: f64| (x * x / (x * x + 0.5)).powf(1.7);
        let s = TiltedGamma::new(1.3, 0.9, w, true, Tail::Bounded(1.0), "test").unwrap();
        check_against_numeric_cdf(s, w, 1.3, 0.9, 21);
    }

    #[test]
    fn increasing_quadratic_tilt() {
        // w(x) = psi-like: sqrt growth in x^2, so subquadratic
        let w = |x: f64| 2.0 * ((x * x + 1.0).sqrt() - 1.0);
        let s = TiltedGamma::new(0.8, 1.0, w, true, Tail::Quadratic, "test").unwrap();
        check_against_numeric_cdf(s, w, 0.8, 1.0, 22);
    }

    #[test]
    fn decreasing_tilt() {
        let w = |x: f64| (0.5 / (x * x + 0.5)).powf(0.8);
        let hi_val = w(1e6);
        let s = TiltedGamma::new(2.0, 1.0, w, false, Tail::Bounded(hi_val.max(1e-12)), "test")
            .unwrap();
        check_against_numeric_cdf(s, w, 2.0, 1.0, 23);
    }

    #[test]
    fn tiny_shape_tilt() {
        let w = |x: f64| x * x / (x * x + 1.0);
        let s = TiltedGamma::new(0.03, 1.0, w, true, Tail::Bounded(1.0), "test").unwrap();
        let mut rng = stream(24, 0);
        let mut s = s;
        for _ in 0..2000 {
            let x = s.sample(&mut rng).unwrap();
            assert!(x > 0.0 && x.is_finite());
        }
    }

    #[test]
    fn envelope_mass_bounds_expected_tilt() {
        // E[w(X)] for w(x) = x^2/(x^2+1), X ~ Gamma(2, 1), versus envelope
        let w = |x: f64| x * x / (x * x + 1.0);
        let s = TiltedGamma::new(2.0, 1.0, w, true, Tail::Bounded(1.0), "test").unwrap();
        let q = QuadratureSettings::default();
        let expect = quadrature::integrate(
            |x| w(x) * x * (-x).exp(),
            1e-12,
            60.0,
            &q,
            "test",
        )
        .unwrap();
        let mass = s.envelope_mass();
        assert!(mass >= expect, "envelope {mass} < target {expect}");
        assert!(mass < expect * 1.2, "envelope too loose: {mass} vs {expect}");
    }
}
