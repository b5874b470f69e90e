//! Slice-sampler MCMC over the exact posterior: latent counts, slice
//! variables, community parameters (with rebirth of inactive atoms from the
//! restricted CRM), and hyperparameter Metropolis-Hastings.

pub mod counts;
pub mod hyper;
pub mod logjoint;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{McmcConfig, ModelConfig};
use crate::crm::{Hyperparams, QuadratureSettings};
use crate::error::{Error, Result};
use crate::generative::CommunityEnsemble;
use crate::graph::{ObservedGraph, Pair};
use crate::rng::{stream, Rng};
use crate::samplers::crm_atoms::{
    sample_inhomogeneous_crm, sample_r_posterior, sample_varsigma_posterior, Community,
};
use crate::samplers::sample_dirichlet;
use crate::trace::TraceRecord;

pub use hyper::{HyperPriors, MhState};

/// How an entry enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// observed count B >= 1: latent counts must sum to B
    Weighted(u64),
    /// observed binary 1: latent total >= 1
    Binary,
    /// held-out entry: latent counts free
    Unobserved,
}

#[derive(Debug, Clone, Copy)]
pub struct TrackedEntry {
    pub pair: Pair,
    pub kind: EntryKind,
}

/// Sparse latent counts with incrementally maintained aggregates.
#[derive(Debug, Clone)]
pub struct LatentCounts {
    z: BTreeMap<Pair, Vec<(usize, u64)>>,
    /// community degrees d_k
    pub d: Vec<u64>,
    /// node-in-community counts m_{ik}, stored as m[k][i]
    pub m: Vec<Vec<u64>>,
}

impl LatentCounts {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            z: BTreeMap::new(),
            d: vec![0; k],
            m: vec![vec![0; n]; k],
        }
    }

    pub fn from_entries(k: usize, n: usize, z: BTreeMap<Pair, Vec<(usize, u64)>>) -> Self {
        let mut out = Self::new(k, n);
        for (&pair, parts) in &z {
            for &(kk, c) in parts {
                out.accumulate(pair, kk, c as i64);
            }
        }
        out.z = z;
        out
    }

    pub fn entry(&self, pair: Pair) -> &[(usize, u64)] {
        self.z.get(&pair).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Pair, &Vec<(usize, u64)>)> {
        self.z.iter()
    }

    fn accumulate(&mut self, (i, j): Pair, k: usize, delta: i64) {
        let apply = |slot: &mut u64| {
            *slot = (*slot as i64 + delta) as u64;
        };
        apply(&mut self.d[k]);
        if i == j {
            apply(&mut self.m[k][i as usize]);
            apply(&mut self.m[k][i as usize]);
        } else {
            apply(&mut self.m[k][i as usize]);
            apply(&mut self.m[k][j as usize]);
        }
    }

    /// Replace the counts of one entry, updating aggregates incrementally.
    pub fn set_entry(&mut self, pair: Pair, new: Vec<(usize, u64)>) {
        if let Some(old) = self.z.remove(&pair) {
            for (k, c) in old {
                self.accumulate(pair, k, -(c as i64));
            }
        }
        for &(k, c) in &new {
            self.accumulate(pair, k, c as i64);
        }
        if !new.is_empty() {
            self.z.insert(pair, new);
        }
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// Exact recomputation of the aggregates from entry-level counts.
    pub fn check_aggregates(&self, n: usize) -> Result<()> {
        let rebuilt = Self::from_entries(self.k(), n, self.z.clone());
        if rebuilt.d != self.d || rebuilt.m != self.m {
            return Err(Error::Invariant(
                "latent aggregates inconsistent with entry-level counts".into(),
            ));
        }
        Ok(())
    }

    /// Reindex communities: `map[old] = Some(new)` keeps a community,
    /// `None` drops it (legal only when it holds no counts).
    fn reindex(&mut self, map: &[Option<usize>], k_new: usize, n: usize) {
        let mut new_d = vec![0u64; k_new];
        let mut new_m = vec![vec![0u64; n]; k_new];
        for (old, slot) in map.iter().enumerate() {
            if let Some(new) = *slot {
                new_d[new] = self.d[old];
                new_m[new] = std::mem::take(&mut self.m[old]);
            } else {
                debug_assert_eq!(self.d[old], 0);
            }
        }
        for parts in self.z.values_mut() {
            for (k, _) in parts.iter_mut() {
                *k = map[*k].expect("counted community dropped during reindex");
            }
            parts.sort_by_key(|&(k, _)| k);
        }
        self.d = new_d;
        self.m = new_m;
    }
}

#[derive(Debug, Clone)]
pub struct SliceState {
    pub s: BTreeMap<Pair, f64>,
    pub s_min: f64,
}

/// Full chain state.
#[derive(Debug, Clone)]
pub struct McmcState {
    pub theta: Hyperparams,
    pub ensemble: CommunityEnsemble,
    pub latent: LatentCounts,
    pub slices: SliceState,
    pub tracked: Vec<TrackedEntry>,
    pub n: usize,
    pub directed: bool,
}

impl McmcState {
    pub fn k_active(&self) -> usize {
        self.latent.d.iter().filter(|&&d| d >= 1).count()
    }

    pub fn active_communities(&self) -> Vec<Community> {
        (0..self.ensemble.len())
            .filter(|&k| self.latent.d[k] >= 1)
            .map(|k| self.ensemble.get(k).clone())
            .collect()
    }
}

fn tracked_entries(graph: &ObservedGraph) -> Result<Vec<TrackedEntry>> {
    let mut out: Vec<TrackedEntry> = graph
        .entries()
        .map(|(pair, c)| TrackedEntry {
            pair,
            kind: if graph.weighted() {
                EntryKind::Weighted(c)
            } else {
                EntryKind::Binary
            },
        })
        .collect();
    out.extend(graph.holdout().map(|pair| TrackedEntry {
        pair,
        kind: EntryKind::Unobserved,
    }));
    if out.is_empty() {
        return Err(Error::Config(
            "graph has no positive or held-out entries; nothing to infer".into(),
        ));
    }
    out.sort_by_key(|e| e.pair);
    Ok(out)
}

/// Initial state: a single community with unit weight and prior
/// affiliations; every observed count assigned to it; slices drawn.
pub fn init_state(graph: &ObservedGraph, theta: &Hyperparams, rng: &mut Rng) -> Result<McmcState> {
    let n = graph.n();
    let tracked = tracked_entries(graph)?;
    let v: Vec<f64> = (0..n)
        .map(|_| crate::samplers::sample_gamma(rng, theta.alpha(), theta.beta()))
        .collect();
    let varsigma: f64 = v.iter().sum();
    let (ensemble, _) = CommunityEnsemble::from_communities(
        n,
        vec![Community {
            r: 1.0,
            varsigma,
            v,
        }],
    );
    let mut latent = LatentCounts::new(1, n);
    for e in &tracked {
        match e.kind {
            EntryKind::Weighted(b) => latent.set_entry(e.pair, vec![(0, b)]),
            EntryKind::Binary => latent.set_entry(e.pair, vec![(0, 1)]),
            EntryKind::Unobserved => {}
        }
    }
    let mut state = McmcState {
        theta: theta.clone(),
        ensemble,
        latent,
        slices: SliceState {
            s: BTreeMap::new(),
            s_min: 1.0,
        },
        tracked,
        n,
        directed: graph.directed(),
    };
    update_slices(&mut state, rng);
    Ok(state)
}

/// Build a state from given communities and entry-level counts (indices into
/// the ensemble); used for warm starts and coherence tests.
pub fn state_from_parts(
    graph: &ObservedGraph,
    theta: &Hyperparams,
    ensemble: CommunityEnsemble,
    z: BTreeMap<Pair, Vec<(usize, u64)>>,
    rng: &mut Rng,
) -> Result<McmcState> {
    let n = graph.n();
    let tracked = tracked_entries(graph)?;
    let latent = LatentCounts::from_entries(ensemble.len(), n, z);
    let mut state = McmcState {
        theta: theta.clone(),
        ensemble,
        latent,
        slices: SliceState {
            s: BTreeMap::new(),
            s_min: 1.0,
        },
        tracked,
        n,
        directed: graph.directed(),
    };
    update_slices(&mut state, rng);
    Ok(state)
}

/// Step 1: per-entry latent count updates in deterministic entry order.
///
/// Weights are in descending order, so the eligible set of an entry is the
/// prefix above its slice; rates are only computed for that prefix.
pub fn update_all_counts(state: &mut McmcState, rng: &mut Rng) -> Result<()> {
    let weights: Vec<f64> = state.ensemble.weights().collect();
    let mut p = Vec::with_capacity(weights.len());
    let tracked = std::mem::take(&mut state.tracked);
    // the slice map and the latent map are both keyed by canonical pair, so a
    // single merge walk over the sorted tracked entries replaces per-entry
    // tree lookups and insertions
    let old_z = std::mem::take(&mut state.latent.z);
    let mut old_iter = old_z.into_iter().peekable();
    let mut new_z: Vec<(Pair, Vec<(usize, u64)>)> = Vec::with_capacity(tracked.len());
    let mut slice_iter = state.slices.s.iter();
    let result = (|| -> Result<()> {
        for e in &tracked {
            let (&s_pair, &s_ij) = slice_iter.next().expect("tracked entry has a slice");
            debug_assert_eq!(s_pair, e.pair);
            let old_parts = loop {
                match old_iter.peek() {
                    Some((pair, _)) if *pair < e.pair => new_z.push(old_iter.next().unwrap()),
                    Some((pair, _)) if *pair == e.pair => break Some(old_iter.next().unwrap().1),
                    _ => break None,
                }
            };
            if let Some(parts) = old_parts {
                for (k, c) in parts {
                    state.latent.accumulate(e.pair, k, -(c as i64));
                }
            }
            let l0 = weights.partition_point(|&rk| rk > s_ij);
            let (i, j) = e.pair;
            let mult = if !state.directed && i != j { 2.0 } else { 1.0 };
            p.clear();
            for k in 0..l0 {
                let c = state.ensemble.get(k);
                p.push(mult * c.r * c.v[i as usize] * c.v[j as usize]);
            }
            let r = &weights[..l0];
            let new = match e.kind {
                EntryKind::Weighted(b) => counts::sample_weighted_counts(rng, b, &p, r, l0)?,
                EntryKind::Binary => counts::sample_binary_counts(rng, &p, r, l0)?,
                EntryKind::Unobserved => counts::sample_unobserved_counts(rng, &p, r, l0)?,
            };
            for &(k, c) in &new {
                state.latent.accumulate(e.pair, k, c as i64);
            }
            if !new.is_empty() {
                new_z.push((e.pair, new));
            }
        }
        Ok(())
    })();
    new_z.extend(old_iter);
    state.latent.z = new_z.into_iter().collect();
    state.tracked = tracked;
    result
}

/// Slice refresh: Unif(0, min counted weight) for entries with counts,
/// Unif(0,1) for count-free unobserved entries; s_min over all tracked
/// slices (observed zeros are never tracked and contribute s = 0 by
/// convention, excluded from the minimum).
pub fn update_slices(state: &mut McmcState, rng: &mut Rng) {
    let mut s_min = f64::INFINITY;
    let mut s = BTreeMap::new();
    for e in &state.tracked {
        let parts = state.latent.entry(e.pair);
        let u: f64 = rand::Rng::gen::<f64>(rng).max(f64::MIN_POSITIVE);
        let val = if parts.is_empty() {
            debug_assert!(matches!(e.kind, EntryKind::Unobserved));
            u
        } else {
            let min_r = parts
                .iter()
                .map(|&(k, _)| state.ensemble.get(k).r)
                .fold(f64::INFINITY, f64::min);
            u * min_r
        };
        s_min = s_min.min(val);
        s.insert(e.pair, val);
    }
    debug_assert!(s_min.is_finite() && s_min > 0.0);
    state.slices = SliceState { s, s_min };
}

/// Step 3: resample active community parameters from their conditionals,
/// refresh slices, redraw the inactive set from the restricted CRM, and
/// restore the canonical descending order.
pub fn update_communities(state: &mut McmcState, rng: &mut Rng) -> Result<()> {
    let n = state.n;
    let theta = state.theta.clone();
    let k_old = state.ensemble.len();
    let mut actives: Vec<Community> = Vec::new();
    let mut old_to_tmp: Vec<Option<usize>> = vec![None; k_old];
    for k in 0..k_old {
        let d = state.latent.d[k];
        if d == 0 {
            continue;
        }
        let alphas: Vec<f64> = state.latent.m[k]
            .iter()
            .map(|&mi| theta.alpha() + mi as f64)
            .collect();
        let phi = sample_dirichlet(rng, &alphas);
        let varsigma = sample_varsigma_posterior(rng, d, n as u64, &theta)?;
        let r = sample_r_posterior(rng, d, varsigma, &theta);
        let v: Vec<f64> = phi.iter().map(|&x| x * varsigma).collect();
        old_to_tmp[k] = Some(actives.len());
        actives.push(Community { r, varsigma, v });
    }
    // slices against the freshly drawn active weights
    let mut s = BTreeMap::new();
    let mut s_min = f64::INFINITY;
    for e in &state.tracked {
        let parts = state.latent.entry(e.pair);
        let u: f64 = rand::Rng::gen::<f64>(rng).max(f64::MIN_POSITIVE);
        let val = if parts.is_empty() {
            u
        } else {
            let min_r = parts
                .iter()
                .map(|&(k, _)| actives[old_to_tmp[k].expect("counted community kept")].r)
                .fold(f64::INFINITY, f64::min);
            u * min_r
        };
        s_min = s_min.min(val);
        s.insert(e.pair, val);
    }
    debug_assert!(s_min.is_finite() && s_min > 0.0);
    // rebirth of the inactive set above the slice
    let n_active = actives.len();
    let inactive = sample_inhomogeneous_crm(rng, s_min, f64::INFINITY, n as u64, &theta)?;
    actives.extend(inactive);
    let (ensemble, remap) = CommunityEnsemble::from_communities(n, actives);
    let map: Vec<Option<usize>> = old_to_tmp
        .iter()
        .map(|slot| slot.map(|tmp| remap[tmp]))
        .collect();
    state
        .latent
        .reindex(&map, n_active + (ensemble.len() - n_active), n);
    // grow aggregates to cover the reborn communities
    state.latent.d.resize(ensemble.len(), 0);
    state.latent.m.resize(ensemble.len(), vec![0; n]);
    state.ensemble = ensemble;
    state.slices = SliceState { s, s_min };
    Ok(())
}

/// One retained posterior sample: the active communities of an iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetainedSample {
    pub iter: u64,
    pub communities: Vec<Community>,
}

#[derive(Debug)]
pub struct ChainOutput {
    pub trace: Vec<TraceRecord>,
    pub samples: Vec<RetainedSample>,
    pub final_state: McmcState,
}

/// Full MCMC driver: `chains` independent chains on per-chain RNG streams,
/// run in parallel.
pub fn run_mcmc(
    graph: &ObservedGraph,
    model: &ModelConfig,
    mcmc: &McmcConfig,
) -> Result<Vec<ChainOutput>> {
    let theta0 = model.hyperparams()?;
    let priors = HyperPriors::for_cap(mcmc.sigma0_max)?;
    let q = QuadratureSettings::default();
    let mut out: Vec<Option<ChainOutput>> = (0..mcmc.chains).map(|_| None).collect();
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = (0..mcmc.chains)
            .map(|chain| {
                let (theta0, priors, q) = (&theta0, &priors, &q);
                scope.spawn(move || run_chain(graph, model, mcmc, theta0, priors, q, chain))
            })
            .collect();
        for (slot, h) in out.iter_mut().zip(handles) {
            *slot = Some(h.join().expect("chain worker panicked")?);
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|c| c.unwrap()).collect())
}

fn run_chain(
    graph: &ObservedGraph,
    model: &ModelConfig,
    mcmc: &McmcConfig,
    theta0: &Hyperparams,
    priors: &HyperPriors,
    q: &QuadratureSettings,
    chain: u64,
) -> Result<ChainOutput> {
    {
        let mut rng = stream(mcmc.seed, chain);
        let mut state = init_state(graph, theta0, &mut rng)?;
        let mut mh = MhState::new(0.02, !model.fix_beta);
        let mut trace = Vec::new();
        let mut samples = Vec::new();
        for t in 1..=mcmc.iterations {
            mh.adapting = t <= mcmc.burn_in;
            update_all_counts(&mut state, &mut rng)?;
            hyper::update_hyperparameters(&mut state, &mut mh, priors, &mut rng, q)?;
            update_communities(&mut state, &mut rng)?;
            if t % 1000 == 0 {
                state.latent.check_aggregates(state.n)?;
            }
            if t > mcmc.burn_in && (t - mcmc.burn_in) % mcmc.thin == 0 {
                let lj = logjoint::log_joint(&state, priors, q);
                trace.push(TraceRecord {
                    iter: t,
                    k_n: state.k_active() as u64,
                    kbar_n: state.ensemble.len() as u64,
                    sigma0: state.theta.sigma0(),
                    kappa: state.theta.kappa(),
                    tau: state.theta.tau(),
                    alpha: state.theta.alpha(),
                    log_joint: lj,
                    s_min: state.slices.s_min,
                });
                samples.push(RetainedSample {
                    iter: t,
                    communities: state.active_communities(),
                });
            }
        }
        Ok(ChainOutput {
            trace,
            samples,
            final_state: state,
        })
    }
}
