//! Retained-sample archive: one JSON record per line, with affiliation
//! vectors stored either in full or truncated to their top-k entries.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::RetainedSample;
use crate::samplers::crm_atoms::Community;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AffiliationVec {
    #[serde(rename = "full")]
    Full(Vec<f64>),
    /// (node index, value) pairs for the k largest entries
    #[serde(rename = "sparse")]
    Sparse(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchivedCommunity {
    pub r: f64,
    pub varsigma: f64,
    pub v: AffiliationVec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub chain: u64,
    pub iter: u64,
    pub communities: Vec<ArchivedCommunity>,
}

fn archive_community(c: &Community, top_k: Option<usize>) -> ArchivedCommunity {
    let v = match top_k {
        None => AffiliationVec::Full(c.v.clone()),
        Some(k) => {
            let mut idx: Vec<usize> = (0..c.v.len()).collect();
            idx.sort_by(|&a, &b| c.v[b].total_cmp(&c.v[a]).then(a.cmp(&b)));
            idx.truncate(k);
            idx.sort_unstable();
            AffiliationVec::Sparse(idx.into_iter().map(|i| (i, c.v[i])).collect())
        }
    };
    ArchivedCommunity {
        r: c.r,
        varsigma: c.varsigma,
        v,
    }
}

impl SampleRecord {
    pub fn new(chain: u64, sample: &RetainedSample, top_k: Option<usize>) -> Self {
        Self {
            chain,
            iter: sample.iter,
            communities: sample
                .communities
                .iter()
                .map(|c| archive_community(c, top_k))
                .collect(),
        }
    }

    /// Reconstitute dense communities over n nodes (missing sparse entries
    /// become zero; the archived total affiliation is kept).
    pub fn to_communities(&self, n: usize) -> Result<Vec<Community>> {
        self.communities
            .iter()
            .map(|a| {
                let v = match &a.v {
                    AffiliationVec::Full(v) => {
                        if v.len() != n {
                            return Err(Error::Config(format!(
                                "archived affiliation vector has {} entries for {n} nodes",
                                v.len()
                            )));
                        }
                        v.clone()
                    }
                    AffiliationVec::Sparse(pairs) => {
                        let mut v = vec![0.0; n];
                        for &(i, x) in pairs {
                            if i >= n {
                                return Err(Error::Config(format!(
                                    "archived affiliation index {i} out of range for {n} nodes"
                                )));
                            }
                            v[i] = x;
                        }
                        v
                    }
                };
                Ok(Community {
                    r: a.r,
                    varsigma: a.varsigma,
                    v,
                })
            })
            .collect()
    }
}

/// Write records as JSON lines.
pub fn write_archive(records: &[SampleRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<Vec<SampleRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
