//! Latent-count conditionals (step 1): per-entry updates for weighted,
//! binary, and unobserved entries, with the undirected variant via doubled
//! off-diagonal rates. All weights are handled in log space.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::samplers::{
    sample_categorical_log, sample_multinomial, sample_poisson, sample_truncated_binomial,
    sample_truncated_poisson,
};

/// log(exp(x) - 1), stable for both tails
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp_m1().ln()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Weighted observed entry with total count b >= 1: choose the largest
/// touched community L with P(L) proportional to
/// [(sum_{l<=L} p_l)^b - (sum_{l<L} p_l)^b] / r_L over the l0 communities
/// above the slice, then z_L >= 1 truncated binomial and the remainder
/// multinomial. Returns the sparse count vector.
pub fn sample_weighted_counts(
    rng: &mut Rng,
    b: u64,
    p: &[f64],
    r: &[f64],
    l0: usize,
) -> Result<Vec<(usize, u64)>> {
    debug_assert!(b >= 1);
    if l0 == 0 || l0 > p.len() {
        return Err(Error::Invariant(format!(
            "weighted count update: eligible set of size {l0} for {} communities",
            p.len()
        )));
    }
    let lp: Vec<f64> = p[..l0].iter().map(|&x| x.ln()).collect();
    // prefix log-sums of p
    let mut lc = Vec::with_capacity(l0);
    let mut acc = f64::NEG_INFINITY;
    for &x in &lp {
        acc = log_sum_exp(&[acc, x]);
        lc.push(acc);
    }
    let bf = b as f64;
    let log_w: Vec<f64> = (0..l0)
        .map(|l| {
            if lc[l] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let head = bf * lc[l] - r[l].ln();
            if l == 0 || lc[l - 1] == f64::NEG_INFINITY {
                head
            } else {
                // log(1 - (c_{l-1}/c_l)^b)
                head + (-(bf * (lc[l - 1] - lc[l])).exp()).ln_1p()
            }
        })
        .collect();
    let li = sample_categorical_log(rng, &log_w);
    let mut z = vec![0u64; li + 1];
    if li == 0 {
        z[0] = b;
    } else {
        let p_top = (lp[li] - lc[li]).exp();
        z[li] = if p_top >= 1.0 - 1e-12 {
            b
        } else {
            sample_truncated_binomial(rng, b, p_top)?
        };
        let rem = b - z[li];
        if rem > 0 {
            let norm = lc[li - 1];
            let probs: Vec<f64> = lp[..li].iter().map(|&x| (x - norm).exp()).collect();
            let counts = sample_multinomial(rng, rem, &probs);
            for (zl, c) in z.iter_mut().zip(counts) {
                *zl = c;
            }
        }
    }
    Ok(z
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect())
}

/// Binary observed entry with Y = 1: choose L with P(L) proportional to
/// (e^{c_L} - e^{c_{L-1}}) / r_L, then z_L >= 1 truncated Poisson and
/// independent Poisson(p_l) below.
pub fn sample_binary_counts(
    rng: &mut Rng,
    p: &[f64],
    r: &[f64],
    l0: usize,
) -> Result<Vec<(usize, u64)>> {
    if l0 == 0 || l0 > p.len() {
        return Err(Error::Invariant(format!(
            "binary count update: eligible set of size {l0} for {} communities",
            p.len()
        )));
    }
    let log_w = binary_log_weights(p, r, l0);
    let li = sample_categorical_log(rng, &log_w);
    fill_binary(rng, p, li)
}

/// Unobserved entry: Bernoulli choice of the all-zero configuration with
/// probability 1 / (1 + sum_L w_L), else the binary-entry law. l0 = 0 means
/// the slice sits above every weight and the entry is zero surely.
pub fn sample_unobserved_counts(
    rng: &mut Rng,
    p: &[f64],
    r: &[f64],
    l0: usize,
) -> Result<Vec<(usize, u64)>> {
    if l0 == 0 {
        return Ok(Vec::new());
    }
    if l0 > p.len() {
        return Err(Error::Invariant(format!(
            "unobserved count update: eligible set of size {l0} for {} communities",
            p.len()
        )));
    }
    let log_w = binary_log_weights(p, r, l0);
    let lse = log_sum_exp(&log_w);
    let p_zero = if lse > 700.0 {
        0.0
    } else {
        1.0 / (1.0 + lse.exp())
    };
    if rand::Rng::gen::<f64>(rng) < p_zero {
        return Ok(Vec::new());
    }
    let li = sample_categorical_log(rng, &log_w);
    fill_binary(rng, p, li)
}

fn binary_log_weights(p: &[f64], r: &[f64], l0: usize) -> Vec<f64> {
    // linear prefix sums c_l; the weights live in log space
    let mut c = 0.0;
    (0..l0)
        .map(|l| {
            let w = if p[l] > 0.0 {
                c + ln_expm1(p[l]) - r[l].ln()
            } else {
                f64::NEG_INFINITY
            };
            c += p[l];
            w
        })
        .collect()
}

fn fill_binary(rng: &mut Rng, p: &[f64], li: usize) -> Result<Vec<(usize, u64)>> {
    let mut z = Vec::new();
    for (l, &pl) in p[..li].iter().enumerate() {
        if pl > 0.0 {
            let c = sample_poisson(rng, pl);
            if c > 0 {
                z.push((l, c));
            }
        }
    }
    z.push((li, sample_truncated_poisson(rng, p[li])?));
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::chi_square_gof;
    use statrs::function::gamma::ln_gamma;
    use std::collections::BTreeMap;

    fn total(z: &[(usize, u64)]) -> u64 {
        z.iter().map(|&(_, c)| c).sum()
    }

    #[test]
    fn single_community_weighted_is_deterministic() {
        let mut rng = stream(70, 0);
        for b in [1u64, 5, 40] {
            let z = sample_weighted_counts(&mut rng, b, &[0.3], &[1.0], 1).unwrap();
            assert_eq!(z, vec![(0, b)]);
        }
    }

    #[test]
    fn weighted_conserves_total() {
        let mut rng = stream(71, 0);
        let p = [0.7, 0.2, 0.9];
        let r = [2.0, 1.0, 0.5];
        for _ in 0..500 {
            let z = sample_weighted_counts(&mut rng, 7, &p, &r, 3).unwrap();
            assert_eq!(total(&z), 7);
            assert!(z.iter().all(|&(_, c)| c > 0));
        }
    }

    #[test]
    fn empty_eligible_set_is_invariant_error() {
        let mut rng = stream(72, 0);
        assert!(sample_weighted_counts(&mut rng, 2, &[0.5], &[1.0], 0).is_err());
        assert!(sample_binary_counts(&mut rng, &[0.5], &[1.0], 0).is_err());
        assert_eq!(
            sample_unobserved_counts(&mut rng, &[0.5], &[1.0], 0).unwrap(),
            Vec::new()
        );
    }

    // exhaustive target for the weighted update: over compositions z of b
    // with max touched index L, weight = [prod_l p_l^{z_l} / z_l!] / r_L
    fn weighted_target(b: u64, p: &[f64], r: &[f64]) -> BTreeMap<Vec<u64>, f64> {
        let k = p.len();
        let mut out = BTreeMap::new();
        let mut z = vec![0u64; k];
        fn rec(
            idx: usize,
            rem: u64,
            z: &mut Vec<u64>,
            p: &[f64],
            r: &[f64],
            out: &mut BTreeMap<Vec<u64>, f64>,
        ) {
            if idx == z.len() {
                if rem > 0 {
                    return;
                }
                let li = match z.iter().rposition(|&c| c > 0) {
                    Some(l) => l,
                    None => return,
                };
                let mut lw = -(r[li].ln());
                for (l, &c) in z.iter().enumerate() {
                    lw += c as f64 * p[l].ln() - ln_gamma(c as f64 + 1.0);
                }
                out.insert(z.clone(), lw.exp());
                return;
            }
            for c in 0..=rem {
                z[idx] = c;
                rec(idx + 1, rem - c, z, p, r, out);
            }
            z[idx] = 0;
        }
        rec(0, b, &mut z, p, r, &mut out);
        let norm: f64 = out.values().sum();
        for v in out.values_mut() {
            *v /= norm;
        }
        out
    }

    #[test]
    fn weighted_matches_enumeration_oracle() {
        // K = 3, b = 2, slice at zero: all communities eligible
        let p = [0.6, 0.25, 0.15];
        let r = [1.5, 0.8, 0.3];
        let b = 2u64;
        let target = weighted_target(b, &p, &r);
        let mut rng = stream(73, 0);
        let reps = 1_000_000usize;
        let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        for _ in 0..reps {
            let z = sample_weighted_counts(&mut rng, b, &p, &r, 3).unwrap();
            let mut dense = vec![0u64; 3];
            for (l, c) in z {
                dense[l] = c;
            }
            *counts.entry(dense).or_insert(0) += 1;
        }
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        for (cfg, &prob) in &target {
            obs.push(*counts.get(cfg).unwrap_or(&0) as f64);
            exp.push(prob * reps as f64);
        }
        assert_eq!(
            counts.iter().map(|(_, &c)| c).sum::<u64>() as usize,
            reps,
            "sampler produced configurations outside the enumerated support"
        );
        let pval = chi_square_gof(&obs, &exp);
        assert!(pval > 0.01, "p = {pval}");
    }

    #[test]
    fn weighted_respects_slice_cutoff() {
        // l0 = 2: community 3 never touched
        let p = [0.6, 0.25, 0.15];
        let r = [1.5, 0.8, 0.3];
        let mut rng = stream(74, 0);
        for _ in 0..2000 {
            let z = sample_weighted_counts(&mut rng, 3, &p, &r, 2).unwrap();
            assert!(z.iter().all(|&(l, _)| l < 2));
        }
    }

    // first-principles target for the binary update: independent
    // Poisson(p_l) restricted to the eligible set, conditioned on total >= 1,
    // weighted by the slice density 1/r_L at the largest touched index
    fn binary_level_probs(p: &[f64], r: &[f64]) -> Vec<f64> {
        // P(L = l) proportional to P(Z_l >= 1) prod_{m>l} P(Z_m = 0) / r_l
        let k = p.len();
        let mut w = vec![0.0; k];
        for l in 0..k {
            let mut x = -(-p[l]).exp_m1(); // 1 - e^{-p_l}
            for &pm in &p[l + 1..] {
                x *= (-pm).exp();
            }
            w[l] = x / r[l];
        }
        let norm: f64 = w.iter().sum();
        w.iter().map(|&x| x / norm).collect()
    }

    #[test]
    fn binary_level_choice_matches_first_principles() {
        let p = [0.8, 0.35];
        let r = [1.2, 0.4];
        let want = binary_level_probs(&p, &r);
        let mut rng = stream(75, 0);
        let reps = 1_000_000usize;
        let mut hits = [0u64; 2];
        for _ in 0..reps {
            let z = sample_binary_counts(&mut rng, &p, &r, 2).unwrap();
            assert!(total(&z) >= 1);
            let li = z.iter().map(|&(l, _)| l).max().unwrap();
            hits[li] += 1;
        }
        for l in 0..2 {
            let got = hits[l] as f64 / reps as f64;
            let se = (want[l] * (1.0 - want[l]) / reps as f64).sqrt();
            assert!(
                (got - want[l]).abs() < 4.0 * se,
                "level {l}: got {got} want {}",
                want[l]
            );
        }
    }

    #[test]
    fn binary_single_community_is_truncated_poisson() {
        let p = [0.9];
        let r = [1.0];
        let mut rng = stream(76, 0);
        let reps = 200_000usize;
        let mut counts = vec![0.0; 8];
        for _ in 0..reps {
            let z = sample_binary_counts(&mut rng, &p, &r, 1).unwrap();
            let t = total(&z) as usize;
            if t < counts.len() {
                counts[t] += 1.0;
            }
        }
        assert_eq!(counts[0], 0.0);
        let denom = -(-0.9f64).exp_m1();
        let mut exp = Vec::new();
        for k in 1..8usize {
            let pmf = (k as f64 * 0.9f64.ln() - 0.9 - ln_gamma(k as f64 + 1.0)).exp() / denom;
            exp.push(pmf * reps as f64);
        }
        let pval = chi_square_gof(&counts[1..], &exp);
        assert!(pval > 0.01, "p = {pval}");
    }

    #[test]
    fn unobserved_zero_probability_closed_form() {
        // single community, p = 0.5: P(all zero) = e^{-0.5}
        let p = [0.5];
        let r = [1.0];
        let want = (-0.5f64).exp();
        let mut rng = stream(77, 0);
        let reps = 1_000_000usize;
        let mut zeros = 0u64;
        for _ in 0..reps {
            if sample_unobserved_counts(&mut rng, &p, &r, 1).unwrap().is_empty() {
                zeros += 1;
            }
        }
        let got = zeros as f64 / reps as f64;
        let se = (want * (1.0 - want) / reps as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se, "got {got} want {want}");
    }

    #[test]
    fn unobserved_matches_poisson_enumeration() {
        // two communities: the law of (Z1, Z2) restricted to the eligible set
        // must be independent Poissons tilted by the slice density; compare
        // the joint over a small box by chi-square
        let p = [0.6, 0.3];
        let r = [1.4, 0.9];
        let mut rng = stream(78, 0);
        let reps = 1_000_000usize;
        let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for _ in 0..reps {
            let z = sample_unobserved_counts(&mut rng, &p, &r, 2).unwrap();
            let mut dense = (0u64, 0u64);
            for (l, c) in z {
                if l == 0 {
                    dense.0 = c;
                } else {
                    dense.1 = c;
                }
            }
            *counts.entry(dense).or_insert(0) += 1;
        }
        // target: weight(z) = prod Poisson-kernel(p_l, z_l) * slice factor;
        // slice factor = 1/r_L for nonzero configs (L = max touched), 1 for
        // the zero config (Unif(0,1) slice density)
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        let mut weights: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for z1 in 0..7u64 {
            for z2 in 0..7u64 {
                let kern = (z1 as f64 * p[0].ln() - p[0] - ln_gamma(z1 as f64 + 1.0)
                    + z2 as f64 * p[1].ln()
                    - p[1]
                    - ln_gamma(z2 as f64 + 1.0))
                    .exp();
                let slice = if z2 > 0 {
                    1.0 / r[1]
                } else if z1 > 0 {
                    1.0 / r[0]
                } else {
                    1.0
                };
                weights.insert((z1, z2), kern * slice);
            }
        }
        let norm: f64 = weights.values().sum::<f64>()
            / (1.0 - 1e-9); // box covers essentially all mass
        for (cfg, w) in &weights {
            obs.push(*counts.get(cfg).unwrap_or(&0) as f64);
            exp.push(w / norm * reps as f64);
        }
        // merge sparse cells
        let mut obs_m = Vec::new();
        let mut exp_m = Vec::new();
        let (mut so, mut se) = (0.0, 0.0);
        for (o, e) in obs.iter().zip(&exp) {
            if *e >= 10.0 {
                obs_m.push(*o);
                exp_m.push(*e);
            } else {
                so += o;
                se += e;
            }
        }
        obs_m.push(so);
        exp_m.push(se);
        let pval = chi_square_gof(&obs_m, &exp_m);
        assert!(pval > 0.01, "p = {pval}");
    }
}
