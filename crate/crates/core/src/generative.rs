//! Exact simulation from the model: the number of active communities is
//! Poisson(Psi(n)); each community draws its affiliation profile, total
//! affiliation, and weight from the size-biased conditionals, and its latent
//! edge counts from a zero-truncated Poisson with multinomial endpoints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crm::{psi_n, Hyperparams, QuadratureSettings};
use crate::error::{Error, Result};
use crate::graph::{ObservedGraph, Pair};
use crate::rng::Rng;
use crate::samplers::crm_atoms::{sample_r_given_varsigma, sample_varsigma_prior, Community};
use crate::samplers::{sample_dirichlet_sym, sample_poisson, sample_truncated_poisson};

/// A set of communities over n nodes, kept in descending weight order
/// (stable on ties by creation index).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunityEnsemble {
    pub n: usize,
    communities: Vec<Community>,
}

impl CommunityEnsemble {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            communities: Vec::new(),
        }
    }

    /// Build from communities, sorting to canonical descending-weight order.
    /// Returns the permutation old index -> new index.
    pub fn from_communities(n: usize, communities: Vec<Community>) -> (Self, Vec<usize>) {
        let k = communities.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            communities[b].r
                .total_cmp(&communities[a].r)
                .then(a.cmp(&b))
        });
        let mut remap = vec![0usize; k];
        for (new_idx, &old_idx) in order.iter().enumerate() {
            remap[old_idx] = new_idx;
        }
        let mut sorted = Vec::with_capacity(k);
        for &old_idx in &order {
            sorted.push(communities[old_idx].clone());
        }
        (
            Self {
                n,
                communities: sorted,
            },
            remap,
        )
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn get(&self, k: usize) -> &Community {
        &self.communities[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Community> {
        self.communities.iter()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.communities.iter().map(|c| c.r)
    }

    /// Check the cached totals and the descending order.
    pub fn check_invariants(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for (k, c) in self.communities.iter().enumerate() {
            if c.v.len() != self.n {
                return Err(Error::Invariant(format!(
                    "community {k} has {} affiliations for {} nodes",
                    c.v.len(),
                    self.n
                )));
            }
            let sum: f64 = c.v.iter().sum();
            if (sum - c.varsigma).abs() > 1e-10 * c.varsigma.max(1e-300) {
                return Err(Error::Invariant(format!(
                    "community {k}: cached total {} != sum {sum}",
                    c.varsigma
                )));
            }
            if c.r > prev {
                return Err(Error::Invariant(format!(
                    "community {k} breaks descending weight order"
                )));
            }
            prev = c.r;
        }
        Ok(())
    }
}

/// Latent counts of a simulated graph: per entry, the communities that
/// produced its edges.
pub type LatentMatrix = BTreeMap<Pair, Vec<(usize, u64)>>;

/// JSON-friendly form of the latent matrix: a sequence of entries instead of
/// a map with tuple keys.
mod latent_serde {
    use super::LatentMatrix;
    use crate::graph::Pair;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &LatentMatrix, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<(&Pair, &Vec<(usize, u64)>)> = m.iter().collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<LatentMatrix, D::Error> {
        let entries: Vec<(Pair, Vec<(usize, u64)>)> = Vec::deserialize(d)?;
        Ok(entries.into_iter().collect())
    }
}

/// The simulated latent structure: active communities and their edge counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub ensemble: CommunityEnsemble,
    /// entry -> list of (community index, count), indices into `ensemble`
    #[serde(with = "latent_serde")]
    pub latent: LatentMatrix,
    /// community degrees d_k (total latent count), all >= 1
    pub degrees: Vec<u64>,
}

/// One community's latent count matrix: total ~ zero-truncated
/// Poisson(r * (sum v)^2), endpoints iid proportional to v.
pub fn simulate_tpoisson_matrix(
    rng: &mut Rng,
    r: f64,
    v: &[f64],
) -> Result<BTreeMap<Pair, u64>> {
    let total_v: f64 = v.iter().sum();
    if !(total_v > 0.0) {
        return Err(Error::Domain {
            name: "sum_v",
            value: total_v,
            reason: "affiliation vector must have positive total",
        });
    }
    if !(r > 0.0) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            reason: "community weight must be positive",
        });
    }
    let total = sample_truncated_poisson(rng, r * total_v * total_v)?;
    // cumulative table for endpoint draws
    let mut cum = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    for &x in v {
        acc += x;
        cum.push(acc);
    }
    let draw_node = |rng: &mut Rng| -> u32 {
        let u = rand::Rng::gen::<f64>(rng) * acc;
        cum.partition_point(|&c| c <= u).min(v.len() - 1) as u32
    };
    let mut out: BTreeMap<Pair, u64> = BTreeMap::new();
    for _ in 0..total {
        let i = draw_node(rng);
        let j = draw_node(rng);
        *out.entry((i, j)).or_insert(0) += 1;
    }
    Ok(out)
}

/// Exact simulation of a directed count graph over n nodes.
pub fn simulate_count_graph(
    rng: &mut Rng,
    n: usize,
    theta: &Hyperparams,
    q: &QuadratureSettings,
) -> Result<(ObservedGraph, GroundTruth)> {
    debug_assert!(n >= 1);
    let mean = psi_n(n as u64, theta, q)?;
    let k_n = sample_poisson(rng, mean);
    let mut communities = Vec::with_capacity(k_n as usize);
    let mut per_community: Vec<BTreeMap<Pair, u64>> = Vec::with_capacity(k_n as usize);
    for _ in 0..k_n {
        let phi = sample_dirichlet_sym(rng, theta.alpha(), n);
        let varsigma = sample_varsigma_prior(rng, n as u64, theta)?;
        let r = sample_r_given_varsigma(rng, varsigma, theta)?;
        let v: Vec<f64> = phi.iter().map(|&p| p * varsigma).collect();
        let counts = simulate_tpoisson_matrix(rng, r, &v)?;
        communities.push(Community { r, varsigma, v });
        per_community.push(counts);
    }
    let (ensemble, remap) = CommunityEnsemble::from_communities(n, communities);
    let mut latent: LatentMatrix = BTreeMap::new();
    let mut degrees = vec![0u64; ensemble.len()];
    let mut graph = ObservedGraph::new(n, true, true);
    for (old_idx, counts) in per_community.into_iter().enumerate() {
        let k = remap[old_idx];
        for ((i, j), c) in counts {
            graph.add_count(i, j, c)?;
            latent.entry((i, j)).or_default().push((k, c));
            degrees[k] += c;
        }
    }
    for entry in latent.values_mut() {
        entry.sort_by_key(|&(k, _)| k);
    }
    debug_assert!(degrees.iter().all(|&d| d >= 1));
    Ok((
        graph,
        GroundTruth {
            ensemble,
            latent,
            degrees,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::samplers::sample_gamma;
    use crate::stats::chi_square_gof;
    use statrs::function::gamma::ln_gamma;

    fn theta(kappa: f64, sigma0: f64, tau: f64, alpha: f64, beta: f64) -> Hyperparams {
        Hyperparams::new(kappa, sigma0, tau, alpha, beta).unwrap()
    }

    #[test]
    fn tiny_kappa_gives_empty_graph() {
        let th = theta(1e-9, 0.2, 0.15, 0.05, 0.2);
        let q = QuadratureSettings::default();
        let mut rng = stream(50, 0);
        for _ in 0..20 {
            let (g, gt) = simulate_count_graph(&mut rng, 10, &th, &q).unwrap();
            assert_eq!(g.num_nonzero(), 0);
            assert_eq!(gt.ensemble.len(), 0);
        }
    }

    #[test]
    fn community_count_is_poisson_psi_n() {
        let th = theta(1.0, 0.2, 1.0, 0.5, 1.0);
        let q = QuadratureSettings::default();
        let want = psi_n(30, &th, &q).unwrap();
        let mut rng = stream(51, 0);
        let reps = 4000;
        let mut total = 0u64;
        let mut total_sq = 0.0;
        for _ in 0..reps {
            let (_, gt) = simulate_count_graph(&mut rng, 30, &th, &q).unwrap();
            let k = gt.ensemble.len() as u64;
            assert!(gt.degrees.iter().all(|&d| d >= 1), "inactive community kept");
            total += k;
            total_sq += (k * k) as f64;
        }
        let mean = total as f64 / reps as f64;
        let var = total_sq / reps as f64 - mean * mean;
        let se = (want / reps as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "mean {mean} want {want}");
        assert!((var / mean - 1.0).abs() < 0.1, "dispersion {}", var / mean);
    }

    #[test]
    fn latent_counts_sum_to_graph() {
        let th = theta(1.0, 0.2, 0.15, 0.05, 0.2);
        let q = QuadratureSettings::default();
        let mut rng = stream(52, 0);
        let (g, gt) = simulate_count_graph(&mut rng, 60, &th, &q).unwrap();
        gt.ensemble.check_invariants().unwrap();
        let mut total_from_latent = 0u64;
        for (&(i, j), parts) in &gt.latent {
            let s: u64 = parts.iter().map(|&(_, c)| c).sum();
            assert_eq!(s, g.count(i, j));
            total_from_latent += s;
        }
        assert_eq!(total_from_latent, g.total_count());
        let d_sum: u64 = gt.degrees.iter().sum();
        assert_eq!(d_sum, g.total_count());
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let th = theta(1.0, 0.2, 0.15, 0.05, 0.2);
        let q = QuadratureSettings::default();
        let (g1, gt1) = simulate_count_graph(&mut stream(53, 4), 40, &th, &q).unwrap();
        let (g2, gt2) = simulate_count_graph(&mut stream(53, 4), 40, &th, &q).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(gt1.ensemble, gt2.ensemble);
        assert_eq!(gt1.latent, gt2.latent);
    }

    #[test]
    fn tpoisson_matrix_single_support_point() {
        let mut rng = stream(54, 0);
        let v = vec![0.0, 0.0, 2.5, 0.0];
        for _ in 0..200 {
            let m = simulate_tpoisson_matrix(&mut rng, 0.7, &v).unwrap();
            assert_eq!(m.keys().collect::<Vec<_>>(), vec![&(2u32, 2u32)]);
        }
        assert!(simulate_tpoisson_matrix(&mut rng, 0.7, &[0.0, 0.0]).is_err());
    }

    fn tpois_pmf(lambda: f64, k: u64) -> f64 {
        (k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp()
            / -(-lambda).exp_m1()
    }

    #[test]
    fn tpoisson_matrix_two_node_enumeration() {
        // r = 0.3, v = (1,1): total ~ tPoisson(1.2), cells uniform over the
        // four ordered pairs; compare the joint law of count matrices with
        // total <= 4 against exact enumeration.
        let (r, lambda) = (0.3f64, 1.2f64);
        let mut rng = stream(55, 0);
        let reps = 1_000_000usize;
        let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        for _ in 0..reps {
            let m = simulate_tpoisson_matrix(&mut rng, r, &[1.0, 1.0]).unwrap();
            let key = vec![
                *m.get(&(0, 0)).unwrap_or(&0),
                *m.get(&(0, 1)).unwrap_or(&0),
                *m.get(&(1, 0)).unwrap_or(&0),
                *m.get(&(1, 1)).unwrap_or(&0),
            ];
            *counts.entry(key).or_insert(0) += 1;
        }
        // enumerate all matrices with total t in 1..=4
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        let mut covered = 0.0;
        for t in 1u64..=4 {
            let pt = tpois_pmf(lambda, t);
            for z0 in 0..=t {
                for z1 in 0..=(t - z0) {
                    for z2 in 0..=(t - z0 - z1) {
                        let z3 = t - z0 - z1 - z2;
                        let log_coef = ln_gamma(t as f64 + 1.0)
                            - [z0, z1, z2, z3]
                                .iter()
                                .map(|&z| ln_gamma(z as f64 + 1.0))
                                .sum::<f64>();
                        let p = pt * log_coef.exp() * 0.25f64.powi(t as i32);
                        covered += p;
                        let key = vec![z0, z1, z2, z3];
                        obs.push(*counts.get(&key).unwrap_or(&0) as f64);
                        exp.push(p * reps as f64);
                    }
                }
            }
        }
        // lump everything with total >= 5
        let tail_obs: u64 = counts
            .iter()
            .filter(|(k, _)| k.iter().sum::<u64>() >= 5)
            .map(|(_, &c)| c)
            .sum();
        obs.push(tail_obs as f64);
        exp.push((1.0 - covered) * reps as f64);
        // merge tiny-expectation bins into the tail
        let mut obs_m = Vec::new();
        let mut exp_m = Vec::new();
        let (mut spill_o, mut spill_e) = (0.0, 0.0);
        for (o, e) in obs.iter().zip(&exp) {
            if *e >= 10.0 {
                obs_m.push(*o);
                exp_m.push(*e);
            } else {
                spill_o += o;
                spill_e += e;
            }
        }
        if spill_e > 0.0 {
            obs_m.push(spill_o);
            exp_m.push(spill_e);
        }
        let p = chi_square_gof(&obs_m, &exp_m);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn tpoisson_matrix_cell_means() {
        // E[Z_ij] = r v_i v_j / (1 - e^{-r (sum v)^2})
        let r = 0.4;
        let v = [0.8, 1.5, 0.3];
        let s: f64 = v.iter().sum();
        let denom = -(-r * s * s).exp_m1();
        let mut rng = stream(56, 0);
        let reps = 200_000usize;
        let mut sums = BTreeMap::new();
        for _ in 0..reps {
            for ((i, j), c) in simulate_tpoisson_matrix(&mut rng, r, &v).unwrap() {
                *sums.entry((i, j)).or_insert(0u64) += c;
            }
        }
        for i in 0..3u32 {
            for j in 0..3u32 {
                let want = r * v[i as usize] * v[j as usize] / denom;
                let got = *sums.get(&(i, j)).unwrap_or(&0) as f64 / reps as f64;
                // SE of a per-rep count is below sqrt(E[Z^2]/reps); use a
                // generous band
                let band = 3.0 * ((want + want * want) / reps as f64).sqrt() + 1e-4;
                assert!((got - want).abs() < band, "({i},{j}): got {got} want {want}");
            }
        }
    }

    #[test]
    fn marginal_zero_probability_matches_direct_crm_monte_carlo() {
        // finite activity: the full CRM is a Poisson(total mass) number of
        // atoms with weights Gamma(-sigma0, tau) and affiliations
        // Gamma(alpha, beta); P(A_12 = 0) = E[exp(-sum_k r_k v_1k v_2k)]
        let th = theta(1.2, -0.5, 1.0, 0.7, 1.0);
        let q = QuadratureSettings::default();
        let n = 3usize;
        let reps = 60_000usize;
        let mut rng = stream(57, 0);
        let mut zero_graph = 0usize;
        for _ in 0..reps {
            let (g, _) = simulate_count_graph(&mut rng, n, &th, &q).unwrap();
            if g.count(0, 1) == 0 {
                zero_graph += 1;
            }
        }
        let p_sim = zero_graph as f64 / reps as f64;

        let mut rng = stream(57, 1);
        let total_mass = th.total_mass();
        let mut acc = 0.0;
        let mut acc_sq = 0.0;
        for _ in 0..reps {
            let n_atoms = sample_poisson(&mut rng, total_mass);
            let mut lambda = 0.0;
            for _ in 0..n_atoms {
                let r = sample_gamma(&mut rng, -th.sigma0(), th.tau());
                let v1 = sample_gamma(&mut rng, th.alpha(), th.beta());
                let v2 = sample_gamma(&mut rng, th.alpha(), th.beta());
                lambda += r * v1 * v2;
            }
            let e = (-lambda).exp();
            acc += e;
            acc_sq += e * e;
        }
        let p_direct = acc / reps as f64;
        let var = acc_sq / reps as f64 - p_direct * p_direct;
        let se_direct = (var / reps as f64).sqrt();
        let se_sim = (p_sim * (1.0 - p_sim) / reps as f64).sqrt();
        let band = 3.0 * (se_direct * se_direct + se_sim * se_sim).sqrt();
        assert!(
            (p_sim - p_direct).abs() < band,
            "simulated {p_sim} vs direct {p_direct} (band {band})"
        );
    }

    #[test]
    fn node_exchangeability_of_edge_mass() {
        // symmetry: expected incident count of node 0 equals node n-1
        let th = theta(1.0, 0.2, 1.0, 0.5, 1.0);
        let q = QuadratureSettings::default();
        let mut rng = stream(58, 0);
        let n = 12usize;
        let reps = 3000;
        let (mut first, mut last) = (0u64, 0u64);
        let mut first_sq = 0.0;
        for _ in 0..reps {
            let (g, _) = simulate_count_graph(&mut rng, n, &th, &q).unwrap();
            let mut f = 0u64;
            let mut l = 0u64;
            for ((i, j), c) in g.entries() {
                if i == 0 || j == 0 {
                    f += c;
                }
                if i as usize == n - 1 || j as usize == n - 1 {
                    l += c;
                }
            }
            first += f;
            last += l;
            first_sq += (f * f) as f64;
        }
        let mf = first as f64 / reps as f64;
        let ml = last as f64 / reps as f64;
        let var = first_sq / reps as f64 - mf * mf;
        let se = (2.0 * var / reps as f64).sqrt();
        assert!((mf - ml).abs() < 4.0 * se, "node 0: {mf}, node n-1: {ml}");
    }

    #[test]
    fn ensemble_sorting_and_remap() {
        let mk = |r: f64| Community {
            r,
            varsigma: 1.0,
            v: vec![1.0],
        };
        let (ens, remap) =
            CommunityEnsemble::from_communities(1, vec![mk(0.5), mk(2.0), mk(1.0)]);
        let ws: Vec<f64> = ens.weights().collect();
        assert_eq!(ws, vec![2.0, 1.0, 0.5]);
        assert_eq!(remap, vec![2, 0, 1]);
        ens.check_invariants().unwrap();
    }
}
