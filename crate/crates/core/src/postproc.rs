//! Post-processing of retained samples: cluster assignment, Binder-loss
//! point estimate over sampled partitions, block densities, and link
//! prediction.

use crate::error::{Error, Result};
use crate::generative::CommunityEnsemble;
use crate::graph::{ObservedGraph, Pair};
use crate::inference::RetainedSample;
use crate::samplers::crm_atoms::Community;

/// Hard node assignment: c_i = argmax_k sqrt(r_k) * v_ik, ties to the
/// smallest community index.
pub fn assign_clusters(communities: &[Community]) -> Result<Vec<usize>> {
    if communities.is_empty() {
        return Err(Error::Invariant(
            "cluster assignment needs at least one community".into(),
        ));
    }
    let n = communities[0].v.len();
    let mut labels = vec![0usize; n];
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for (k, c) in communities.iter().enumerate() {
            let score = c.r.sqrt() * c.v[i];
            if score > best {
                best = score;
                *label = k;
            }
        }
    }
    Ok(labels)
}

/// Convenience wrapper for an ensemble.
pub fn assign_clusters_ensemble(ensemble: &CommunityEnsemble) -> Result<Vec<usize>> {
    let coms: Vec<Community> = ensemble.iter().cloned().collect();
    assign_clusters(&coms)
}

#[derive(Debug, Clone)]
pub struct PartitionEstimate {
    pub labels: Vec<usize>,
    /// posterior co-assignment frequencies, symmetric with unit diagonal
    pub co_clustering: Vec<Vec<f64>>,
    /// index into the provided sample list realizing the minimum
    pub source_iteration: usize,
}

/// Sample-restricted minimizer of the empirical expected Binder loss
/// sum_{i<j} |1{c_i = c_j} - co_clustering_ij|; ties go to the earliest
/// sample.
pub fn binder_point_estimate(label_samples: &[Vec<usize>]) -> Result<PartitionEstimate> {
    if label_samples.is_empty() {
        return Err(Error::Invariant("no label samples provided".into()));
    }
    let n = label_samples[0].len();
    let mut co = vec![vec![0.0f64; n]; n];
    for labels in label_samples {
        debug_assert_eq!(labels.len(), n);
        for i in 0..n {
            for j in (i + 1)..n {
                if labels[i] == labels[j] {
                    co[i][j] += 1.0;
                }
            }
        }
    }
    let m = label_samples.len() as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            co[i][j] /= m;
            co[j][i] = co[i][j];
        }
        co[i][i] = 1.0;
    }
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (idx, labels) in label_samples.iter().enumerate() {
        let mut loss = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let same = if labels[i] == labels[j] { 1.0 } else { 0.0 };
                loss += (same - co[i][j]).abs();
            }
        }
        if loss < best {
            best = loss;
            best_idx = idx;
        }
    }
    Ok(PartitionEstimate {
        labels: label_samples[best_idx].clone(),
        co_clustering: co,
        source_iteration: best_idx,
    })
}

#[derive(Debug, Clone)]
pub struct BlockDensities {
    /// density[a][b]: observed positive entries between blocks a and b over
    /// the number of observable pairs between them (0 when none observable)
    pub density: Vec<Vec<f64>>,
    /// blocks with no member nodes
    pub empty: Vec<bool>,
}

/// Connection densities between and within label blocks, respecting
/// directedness and skipping held-out pairs.
pub fn block_densities(graph: &ObservedGraph, labels: &[usize]) -> Result<BlockDensities> {
    let n = graph.n();
    if labels.len() != n {
        return Err(Error::Invariant(format!(
            "{} labels for {} nodes",
            labels.len(),
            n
        )));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut possible = vec![vec![0u64; k]; k];
    let mut edges = vec![vec![0u64; k]; k];
    let block = |i: u32| labels[i as usize];
    for (i, j) in graph.all_pairs() {
        if !graph.is_observed(i, j) {
            continue;
        }
        let (a, b) = (block(i), block(j));
        possible[a][b] += 1;
        if !graph.directed() && a != b {
            // unordered cross-block pair counts toward both orderings' cell
            possible[b][a] += 1;
        }
        if graph.count(i, j) > 0 {
            edges[a][b] += 1;
            if !graph.directed() && a != b {
                edges[b][a] += 1;
            }
        }
    }
    let mut density = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in 0..k {
            if possible[a][b] > 0 {
                density[a][b] = edges[a][b] as f64 / possible[a][b] as f64;
            }
        }
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(BlockDensities {
        density,
        empty: counts.iter().map(|&c| c == 0).collect(),
    })
}

/// Posterior mean link probability 1 - exp(-Lambda_ij) per query entry,
/// averaged over retained samples; undirected off-diagonal rates double.
pub fn predict_links(
    samples: &[RetainedSample],
    entries: &[Pair],
    directed: bool,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Invariant("no retained samples".into()));
    }
    let mut out = vec![0.0f64; entries.len()];
    for sample in samples {
        for (slot, &(i, j)) in out.iter_mut().zip(entries) {
            let mult = if !directed && i != j { 2.0 } else { 1.0 };
            let lambda: f64 = sample
                .communities
                .iter()
                .map(|c| mult * c.r * c.v[i as usize] * c.v[j as usize])
                .sum();
            *slot += -(-lambda).exp_m1();
        }
    }
    let m = samples.len() as f64;
    for slot in &mut out {
        *slot /= m;
        debug_assert!(*slot >= 0.0 && *slot <= 1.0);
    }
    Ok(out)
}
