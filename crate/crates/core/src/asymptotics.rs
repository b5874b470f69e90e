//! Empirical checks of the growth asymptotics: K_n paths in the constrained
//! nested setting, the degree-ratio power law, and the overlap cosine limit.
//!
//! The nested experiment simulates the exact ensemble once on the master node
//! budget n_max; a community is active at a prefix n when at least one of its
//! interactions involves only the first n nodes. Since any community active at
//! some n <= n_max is active at n_max, the exact sampler's active set already
//! contains every community a prefix can see, so there is no weight truncation
//! and the truncation error budget is exactly zero.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::crm::{psi_n, Hyperparams, QuadratureSettings};
use crate::error::{Error, Result};
use crate::generative::simulate_count_graph;
use crate::rng::{stream, Rng};

/// Memory guard for the nested experiment (each replicate holds an ensemble
/// with O(K_n * n) affiliations).
pub const MAX_NESTED_N: usize = 100_000;

/// Growth regime of K_n, determined by the sign of sigma0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Bounded,
    Logarithmic,
    Polynomial,
}

impl Regime {
    pub fn of(theta: &Hyperparams) -> Self {
        if theta.sigma0() < 0.0 {
            Regime::Bounded
        } else if theta.sigma0() == 0.0 {
            Regime::Logarithmic
        } else {
            Regime::Polynomial
        }
    }
}

/// Asymptotic equivalent of K_n: -kappa tau^sigma0 / sigma0 (bounded),
/// 2 kappa log n (logarithmic), kappa (alpha/beta)^{2 sigma0} n^{2 sigma0} /
/// sigma0 (polynomial).
pub fn growth_asymptote(theta: &Hyperparams, n: f64) -> f64 {
    let s = theta.sigma0();
    match Regime::of(theta) {
        Regime::Bounded => -theta.kappa() * theta.tau().powf(s) / s,
        Regime::Logarithmic => 2.0 * theta.kappa() * n.ln(),
        Regime::Polynomial => {
            theta.kappa() * (theta.alpha() / theta.beta() * n).powf(2.0 * s) / s
        }
    }
}

/// Results of the nested growth experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub n_grid: Vec<usize>,
    /// K_n paths, indexed `[replicate][grid point]`
    pub k_values: Vec<Vec<u64>>,
    pub mean_k: Vec<f64>,
    /// exact finite-n means Psi(n)
    pub theory: Vec<f64>,
    /// closed-form asymptote per grid point (never fitted)
    pub asymptote: Vec<f64>,
    pub regime: Regime,
    /// expected number of active communities missed by the simulation; the
    /// exact sampler makes this identically zero
    pub truncation_budget: f64,
}

impl GrowthReport {
    /// One row per (n, replicate) pair: `n,replicate,k_n,theory`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "n,replicate,k_n,theory")?;
        for (g, &n) in self.n_grid.iter().enumerate() {
            for (rep, path_k) in self.k_values.iter().enumerate() {
                writeln!(w, "{n},{rep},{},{:.16e}", path_k[g], self.theory[g])?;
            }
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

/// Run `f` over replicate indices on independent streams, in parallel.
fn parallel_replicates<T, F>(replicates: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Rng) -> Result<T> + Sync,
{
    if replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(replicates);
    let mut out: Vec<Option<T>> = (0..replicates).map(|_| None).collect();
    std::thread::scope(|scope| -> Result<()> {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || -> Result<Vec<(usize, T)>> {
                    let mut acc = Vec::new();
                    let mut rep = w;
                    while rep < replicates {
                        let mut rng = stream(seed, rep as u64);
                        acc.push((rep, f(&mut rng)?));
                        rep += workers;
                    }
                    Ok(acc)
                })
            })
            .collect();
        for h in handles {
            for (rep, value) in h.join().expect("replicate worker panicked")? {
                out[rep] = Some(value);
            }
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|v| v.unwrap()).collect())
}

/// Constrained nested growth: K_n paths over `n_grid` (exact at every n,
/// nondecreasing along each replicate).
pub fn nested_growth_experiment(
    theta: &Hyperparams,
    n_grid: &[usize],
    replicates: usize,
    rng: &mut Rng,
) -> Result<GrowthReport> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "n_grid must be strictly increasing and positive".into(),
        ));
    }
    let n_max = *n_grid.last().unwrap();
    if n_max > MAX_NESTED_N {
        return Err(Error::Config(format!(
            "n_grid max {n_max} exceeds the memory guard {MAX_NESTED_N}"
        )));
    }
    let q = QuadratureSettings::default();
    let theory: Vec<f64> = n_grid
        .iter()
        .map(|&n| psi_n(n as u64, theta, &q))
        .collect::<Result<_>>()?;
    let asymptote: Vec<f64> = n_grid
        .iter()
        .map(|&n| growth_asymptote(theta, n as f64))
        .collect();

    let seed = rand::Rng::gen::<u64>(rng);
    let k_values = parallel_replicates(replicates, seed, |rng| {
        let (_, gt) = simulate_count_graph(rng, n_max, theta, &q)?;
        // activation threshold: the smallest prefix that contains one of the
        // community's interactions
        let mut thresholds = vec![usize::MAX; gt.ensemble.len()];
        for (&(i, j), parts) in &gt.latent {
            let bound = i.max(j) as usize + 1;
            for &(k, _) in parts {
                thresholds[k] = thresholds[k].min(bound);
            }
        }
        thresholds.sort_unstable();
        Ok(n_grid
            .iter()
            .map(|&n| thresholds.partition_point(|&t| t <= n) as u64)
            .collect::<Vec<u64>>())
    })?;

    let mean_k: Vec<f64> = (0..n_grid.len())
        .map(|g| k_values.iter().map(|p| p[g] as f64).sum::<f64>() / replicates as f64)
        .collect();
    Ok(GrowthReport {
        n_grid: n_grid.to_vec(),
        k_values,
        mean_k,
        theory,
        asymptote,
        regime: Regime::of(theta),
        truncation_budget: 0.0,
    })
}

/// Limiting ratio K_{n,j}/K_n = sigma Gamma(j - sigma) / (Gamma(1 - sigma) j!)
/// for sigma in (0, 1).
pub fn ratio_limit(sigma: f64, j: u64) -> f64 {
    (sigma.ln() + ln_gamma(j as f64 - sigma) - ln_gamma(1.0 - sigma)
        - ln_gamma(j as f64 + 1.0))
        .exp()
}

/// Degree-ratio table: K_{n,j} counts pooled across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioTable {
    pub n: usize,
    pub j_max: usize,
    /// pooled K_{n,j} for j = 1..=j_max
    pub counts: Vec<u64>,
    /// pooled K_n across the retained replicates
    pub total_k: u64,
    pub ratios: Vec<f64>,
    /// binomial standard errors sqrt(p (1-p) / K_n)
    pub std_errors: Vec<f64>,
    pub limits: Vec<f64>,
    /// replicates excluded because K_n = 0
    pub excluded: usize,
}

/// Empirical degree ratios at size n (the power-law regime sigma0 > 0).
pub fn degree_ratio_experiment(
    theta: &Hyperparams,
    n: usize,
    replicates: usize,
    j_max: usize,
    rng: &mut Rng,
) -> Result<RatioTable> {
    if theta.sigma0() <= 0.0 {
        return Err(Error::Domain {
            name: "sigma0",
            value: theta.sigma0(),
            reason: "the degree-ratio limit requires the power-law regime",
        });
    }
    if j_max == 0 {
        return Err(Error::Config("j_max must be >= 1".into()));
    }
    let q = QuadratureSettings::default();
    let seed = rand::Rng::gen::<u64>(rng);
    let degrees = parallel_replicates(replicates, seed, |rng| {
        let (_, gt) = simulate_count_graph(rng, n, theta, &q)?;
        Ok(gt.degrees)
    })?;

    let mut counts = vec![0u64; j_max];
    let mut total_k = 0u64;
    let mut excluded = 0usize;
    for rep in degrees {
        if rep.is_empty() {
            excluded += 1;
            continue;
        }
        total_k += rep.len() as u64;
        for d in rep {
            if d as usize <= j_max {
                counts[d as usize - 1] += 1;
            }
        }
    }
    if total_k == 0 {
        return Err(Error::Invariant(
            "every replicate had zero active communities".into(),
        ));
    }
    let sigma = theta.sigma0();
    let ratios: Vec<f64> = counts.iter().map(|&c| c as f64 / total_k as f64).collect();
    let std_errors: Vec<f64> = ratios
        .iter()
        .map(|&p| (p * (1.0 - p) / total_k as f64).sqrt())
        .collect();
    let limits: Vec<f64> = (1..=j_max as u64).map(|j| ratio_limit(sigma, j)).collect();
    Ok(RatioTable {
        n,
        j_max,
        counts,
        total_k,
        ratios,
        std_errors,
        limits,
        excluded,
    })
}

/// Pairwise community-overlap cosines against the alpha/(alpha+1) limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CosineReport {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// community pairs pooled across replicates
    pub pairs: usize,
    /// replicates skipped for having fewer than two communities
    pub skipped: usize,
    pub limit: f64,
}

/// Mean pairwise cosine between affiliation vectors of active communities.
pub fn overlap_cosine_experiment(
    theta: &Hyperparams,
    n: usize,
    replicates: usize,
    rng: &mut Rng,
) -> Result<CosineReport> {
    let q = QuadratureSettings::default();
    let seed = rand::Rng::gen::<u64>(rng);
    let per_rep = parallel_replicates(replicates, seed, |rng| {
        let (_, gt) = simulate_count_graph(rng, n, theta, &q)?;
        let k = gt.ensemble.len();
        if k < 2 {
            return Ok(None);
        }
        let norms: Vec<f64> = gt
            .ensemble
            .iter()
            .map(|c| c.v.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut cosines = Vec::with_capacity(k * (k - 1) / 2);
        for a in 0..k {
            for b in (a + 1)..k {
                let dot: f64 = gt
                    .ensemble
                    .get(a)
                    .v
                    .iter()
                    .zip(&gt.ensemble.get(b).v)
                    .map(|(x, y)| x * y)
                    .sum();
                cosines.push(dot / (norms[a] * norms[b]));
            }
        }
        Ok(Some(cosines))
    })?;

    let mut sum = 0.0;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for rep in per_rep {
        match rep {
            None => skipped += 1,
            Some(cosines) => {
                for c in cosines {
                    sum += c;
                    min = min.min(c);
                    max = max.max(c);
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Invariant(
            "no replicate produced two active communities".into(),
        ));
    }
    Ok(CosineReport {
        n,
        mean: sum / pairs as f64,
        min,
        max,
        pairs,
        skipped,
        limit: theta.alpha() / (theta.alpha() + 1.0),
    })
}
