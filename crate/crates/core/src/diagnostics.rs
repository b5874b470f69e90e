//! Trace diagnostics: potential scale reduction across chains and effective
//! sample size via the initial monotone positive sequence estimator.

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Potential scale reduction factor over chains of equal length:
/// sqrt((W + B/n) / W), where W is the mean within-chain variance and B/n the
/// variance of the chain means. Identical chains give exactly 1.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Config("psrf needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Config(
            "psrf needs equal chain lengths of at least two".into(),
        ));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| sample_var(c, mu))
        .sum::<f64>()
        / m as f64;
    let grand = mean(&means);
    let b_over_n = sample_var(&means, grand);
    if w == 0.0 {
        // degenerate constant chains: converged by definition
        return Ok(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((w + b_over_n) / w).sqrt())
}

/// Split-chain PSRF: each chain is halved (dropping a middle element when the
/// length is odd) so within-chain drift also inflates the factor.
pub fn split_psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::Config("split_psrf needs at least one chain".into()));
    }
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return Err(Error::Config(
                "split_psrf needs chains of length at least four".into(),
            ));
        }
        halves.push(c[..h].to_vec());
        halves.push(c[c.len() - h..].to_vec());
    }
    psrf(&halves)
}

/// Effective sample size of a single chain (Geyer's initial monotone positive
/// sequence over paired autocovariances). A constant chain counts as fully
/// independent.
pub fn ess(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let mu = mean(chain);
    let var0 = chain.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
    if var0 == 0.0 {
        return n as f64;
    }
    let autocov = |t: usize| -> f64 {
        chain[..n - t]
            .iter()
            .zip(&chain[t..])
            .map(|(a, b)| (a - mu) * (b - mu))
            .sum::<f64>()
            / n as f64
    };
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 1;
    while t + 1 < n {
        let pair = autocov(t) + autocov(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair); // enforce monotone nonincreasing
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let denom = 1.0 + 2.0 * sum_pairs / var0;
    (n as f64 / denom).min(n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn identical_chains_have_unit_psrf() {
        let c = vec![0.3, 1.7, -0.4, 2.2, 0.9, 1.1];
        let chains = vec![c.clone(), c.clone(), c];
        assert_eq!(psrf(&chains).unwrap(), 1.0);
    }

    #[test]
    fn psrf_four_value_hand_fixture() {
        // chains [0,2] and [1,3]: W = (2 + 2)/2 = 2, chain means 1 and 2 give
        // B/n = 0.5, so PSRF = sqrt(2.5/2) = sqrt(1.25)
        let chains = vec![vec![0.0, 2.0], vec![1.0, 3.0]];
        let got = psrf(&chains).unwrap();
        assert!((got - 1.25f64.sqrt()).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn psrf_detects_separated_chains() {
        let mut rng = stream(120, 0);
        let draw = |rng: &mut crate::rng::Rng, shift: f64| -> Vec<f64> {
            (0..500)
                .map(|_| shift + rand::Rng::gen::<f64>(rng))
                .collect()
        };
        let close = vec![draw(&mut rng, 0.0), draw(&mut rng, 0.0)];
        let far = vec![draw(&mut rng, 0.0), draw(&mut rng, 10.0)];
        assert!(psrf(&close).unwrap() < 1.05);
        assert!(psrf(&far).unwrap() > 5.0);
    }

    #[test]
    fn split_psrf_detects_drift_within_one_chain() {
        // a single trending chain looks fine unsplit but not split
        let trend: Vec<f64> = (0..1000)
            .map(|i| i as f64 / 100.0)
            .collect();
        assert!(split_psrf(&[trend]).unwrap() > 2.0);
        let mut rng = stream(121, 0);
        let flat: Vec<f64> = (0..1000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        assert!(split_psrf(&[flat]).unwrap() < 1.05);
    }

    #[test]
    fn ess_of_white_noise_is_near_n() {
        let mut rng = stream(122, 0);
        let x: Vec<f64> = (0..20_000).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let e = ess(&x);
        assert!(e > 15_000.0, "ess {e}");
        assert!(e <= 20_000.0);
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with coefficient rho: ESS/n -> (1 - rho)/(1 + rho)
        let rho = 0.9f64;
        let n = 200_000;
        let mut rng = stream(123, 0);
        let mut x = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            let eps: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
            prev = rho * prev + eps;
            x.push(prev);
        }
        let want = n as f64 * (1.0 - rho) / (1.0 + rho);
        let got = ess(&x);
        assert!(
            (got / want - 1.0).abs() < 0.15,
            "ess {got} vs theory {want}"
        );
    }

    #[test]
    fn ess_degenerate_inputs() {
        assert_eq!(ess(&[1.0, 1.0, 1.0, 1.0, 1.0]), 5.0);
        assert_eq!(ess(&[2.0, 3.0]), 2.0);
    }

    #[test]
    fn psrf_input_validation() {
        assert!(psrf(&[vec![1.0, 2.0]]).is_err());
        assert!(psrf(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(split_psrf(&[]).is_err());
        assert!(split_psrf(&[vec![1.0, 2.0]]).is_err());
    }
}
