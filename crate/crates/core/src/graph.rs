//! Observed graphs: sparse count/binary matrices with an observation mask,
//! plus the edge-list and mask text formats.
//!
//! Directed graphs index all ordered pairs including the diagonal; undirected
//! graphs store the upper triangle i <= j. Unobserved (held-out) entries are
//! tracked explicitly and never carry counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedGraph {
    n: usize,
    directed: bool,
    weighted: bool,
    entries: BTreeMap<Pair, u64>,
    /// held-out pairs (canonical keys); observed set is the complement
    holdout: BTreeSet<Pair>,
}

impl ObservedGraph {
    pub fn new(n: usize, directed: bool, weighted: bool) -> Self {
        Self {
            n,
            directed,
            weighted,
            entries: BTreeMap::new(),
            holdout: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn directed(&self) -> bool {
        self.directed
    }
    pub fn weighted(&self) -> bool {
        self.weighted
    }

    /// Canonical storage key: undirected graphs fold to i <= j.
    pub fn key(&self, i: u32, j: u32) -> Pair {
        if self.directed || i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    fn check_bounds(&self, i: u32, j: u32) -> Result<()> {
        if (i as usize) < self.n && (j as usize) < self.n {
            Ok(())
        } else {
            Err(Error::Invariant(format!(
                "index ({i}, {j}) out of bounds for graph with {} nodes",
                self.n
            )))
        }
    }

    /// Add to an entry's count (binary graphs saturate at 1).
    pub fn add_count(&mut self, i: u32, j: u32, count: u64) -> Result<()> {
        self.check_bounds(i, j)?;
        let key = self.key(i, j);
        if self.holdout.contains(&key) {
            return Err(Error::Invariant(format!(
                "entry ({i}, {j}) is held out and cannot carry observations"
            )));
        }
        if count == 0 {
            return Ok(());
        }
        let slot = self.entries.entry(key).or_insert(0);
        *slot = if self.weighted { *slot + count } else { 1 };
        Ok(())
    }

    pub fn count(&self, i: u32, j: u32) -> u64 {
        *self.entries.get(&self.key(i, j)).unwrap_or(&0)
    }

    pub fn is_observed(&self, i: u32, j: u32) -> bool {
        !self.holdout.contains(&self.key(i, j))
    }

    /// Nonzero observed entries in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (Pair, u64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn num_nonzero(&self) -> usize {
        self.entries.len()
    }

    pub fn total_count(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn holdout(&self) -> impl Iterator<Item = Pair> + '_ {
        self.holdout.iter().copied()
    }

    pub fn num_holdout(&self) -> usize {
        self.holdout.len()
    }

    /// Number of index pairs in the full index set I.
    pub fn num_pairs(&self) -> usize {
        if self.directed {
            self.n * self.n
        } else {
            self.n * (self.n + 1) / 2
        }
    }

    /// All canonical index pairs.
    pub fn all_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        let n = self.n as u32;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i };
            (start..n).map(move |j| (i, j))
        })
    }

    /// Mark pairs as held out, removing any counts they carried; returns the
    /// removed values for evaluation. Errors if nothing remains observed.
    pub fn hold_out(&mut self, pairs: &[Pair]) -> Result<Vec<(Pair, u64)>> {
        let mut removed = Vec::new();
        for &(i, j) in pairs {
            self.check_bounds(i, j)?;
            let key = self.key(i, j);
            if self.holdout.insert(key) {
                if let Some(v) = self.entries.remove(&key) {
                    removed.push((key, v));
                }
            }
        }
        if self.holdout.len() >= self.num_pairs() {
            return Err(Error::Config("no observed entries remain".into()));
        }
        Ok(removed)
    }

    /// Entrywise indicator; idempotent.
    pub fn binarize(&self) -> Self {
        let mut out = self.clone();
        out.weighted = false;
        for v in out.entries.values_mut() {
            *v = 1;
        }
        out
    }

    /// Fold a directed count graph to undirected: B_ij = A_ij + A_ji for
    /// i < j, B_ii = A_ii.
    pub fn symmetrize(&self) -> Self {
        let mut out = ObservedGraph::new(self.n, false, true);
        for (&(i, j), &v) in &self.entries {
            let key = if i <= j { (i, j) } else { (j, i) };
            *out.entries.entry(key).or_insert(0) += v;
        }
        out.holdout = self
            .holdout
            .iter()
            .map(|&(i, j)| if i <= j { (i, j) } else { (j, i) })
            .collect();
        if !self.weighted {
            out.binarize()
        } else {
            out
        }
    }

    /// Parse an edge list: lines "i j" or "i j count", whitespace separated,
    /// '#' comments; duplicate pairs sum (binary saturates at 1).
    pub fn read_edge_list(
        path: &Path,
        n: usize,
        directed: bool,
        weighted: bool,
    ) -> Result<Self> {
        let mut graph = ObservedGraph::new(n, directed, weighted);
        let file = std::fs::File::open(path)?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("expected 2 or 3 fields, found {}", fields.len()),
                });
            }
            let parse_idx = |s: &str| -> Result<u32> {
                s.parse::<u32>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("bad node index {s:?}: {e}"),
                })
            };
            let i = parse_idx(fields[0])?;
            let j = parse_idx(fields[1])?;
            for &idx in &[i, j] {
                if idx as usize >= n {
                    return Err(Error::Bounds {
                        path: path.to_path_buf(),
                        line: lineno,
                        index: idx as usize,
                        n,
                    });
                }
            }
            let count = if fields.len() == 3 {
                fields[2].parse::<u64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("bad count {:?}: {e}", fields[2]),
                })?
            } else {
                1
            };
            graph.add_count(i, j, count)?;
        }
        Ok(graph)
    }

    /// Write the canonical edge list ("i j count" rows in key order).
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for (&(i, j), &v) in &self.entries {
            writeln!(f, "{i} {j} {v}")?;
        }
        Ok(())
    }

    /// Read a mask file of held-out "i j" pairs and apply it.
    pub fn apply_mask_file(&mut self, path: &Path) -> Result<Vec<(Pair, u64)>> {
        let pairs = read_pair_list(path, self.n)?;
        self.hold_out(&pairs)
    }
}

/// Parse a file of "i j" pairs (same comment/whitespace rules as edge lists).
pub fn read_pair_list(path: &Path, n: usize) -> Result<Vec<Pair>> {
    let file = std::fs::File::open(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let mut idx = [0u32; 2];
        for (slot, s) in idx.iter_mut().zip(&fields) {
            *slot = s.parse::<u32>().map_err(|e| Error::Parse {
                path: PathBuf::from(path),
                line: lineno,
                reason: format!("bad node index {s:?}: {e}"),
            })?;
            if *slot as usize >= n {
                return Err(Error::Bounds {
                    path: path.to_path_buf(),
                    line: lineno,
                    index: *slot as usize,
                    n,
                });
            }
        }
        pairs.push((idx[0], idx[1]));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut f, content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_empty_graph() {
        let f = write_tmp("# nothing here\n\n");
        let g = ObservedGraph::read_edge_list(f.path(), 5, true, true).unwrap();
        assert_eq!(g.num_nonzero(), 0);
        assert_eq!(g.n(), 5);
    }

    #[test]
    fn duplicate_lines_sum() {
        let f = write_tmp("0 1 2\n0 1 3\n");
        let g = ObservedGraph::read_edge_list(f.path(), 5, true, true).unwrap();
        assert_eq!(g.count(0, 1), 5);
    }

    #[test]
    fn undirected_normalizes_to_upper_triangle() {
        let f = write_tmp("2 0 1\n0 2 1\n1 1 4\n");
        let g = ObservedGraph::read_edge_list(f.path(), 3, false, true).unwrap();
        assert_eq!(g.count(0, 2), 2);
        assert_eq!(g.count(2, 0), 2);
        assert_eq!(g.count(1, 1), 4);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let f = write_tmp("0 1 2\nnot numbers\n");
        match ObservedGraph::read_edge_list(f.path(), 5, true, true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_tmp("0 9 1\n");
        match ObservedGraph::read_edge_list(f.path(), 5, true, true) {
            Err(Error::Bounds { line, index, n, .. }) => {
                assert_eq!((line, index, n), (1, 9, 5));
            }
            other => panic!("expected bounds error, got {other:?}"),
        }
    }

    #[test]
    fn binary_graphs_saturate() {
        let f = write_tmp("0 1 7\n0 1\n");
        let g = ObservedGraph::read_edge_list(f.path(), 3, true, false).unwrap();
        assert_eq!(g.count(0, 1), 1);
        let b = g.binarize();
        assert_eq!(b, b.binarize());
    }

    #[test]
    fn symmetrize_follows_sum_rule() {
        let mut g = ObservedGraph::new(4, true, true);
        g.add_count(0, 1, 2).unwrap();
        g.add_count(1, 0, 3).unwrap();
        g.add_count(2, 2, 4).unwrap();
        let u = g.symmetrize();
        assert_eq!(u.count(0, 1), 5);
        assert_eq!(u.count(1, 0), 5);
        assert_eq!(u.count(2, 2), 4);
        assert_eq!(u.total_count(), g.total_count());
        assert!(!u.directed());
    }

    #[test]
    fn holdout_removes_and_blocks_entries() {
        let mut g = ObservedGraph::new(3, true, true);
        g.add_count(0, 1, 2).unwrap();
        let removed = g.hold_out(&[(0, 1), (1, 2)]).unwrap();
        assert_eq!(removed, vec![((0, 1), 2)]);
        assert!(!g.is_observed(0, 1));
        assert_eq!(g.count(0, 1), 0);
        assert!(g.add_count(0, 1, 1).is_err());
    }

    #[test]
    fn masking_everything_is_rejected() {
        let mut g = ObservedGraph::new(2, true, true);
        let all: Vec<Pair> = g.all_pairs().collect();
        assert!(g.hold_out(&all).is_err());
    }

    #[test]
    fn mask_file_roundtrip() {
        let f = write_tmp("0 1\n# comment\n2 2\n");
        let mut g = ObservedGraph::new(3, true, true);
        g.add_count(0, 1, 5).unwrap();
        let removed = g.apply_mask_file(f.path()).unwrap();
        assert_eq!(removed, vec![((0, 1), 5)]);
        assert_eq!(g.num_holdout(), 2);
    }

    #[test]
    fn all_pairs_counts() {
        let d = ObservedGraph::new(3, true, true);
        assert_eq!(d.all_pairs().count(), 9);
        assert_eq!(d.num_pairs(), 9);
        let u = ObservedGraph::new(3, false, true);
        let pairs: Vec<Pair> = u.all_pairs().collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        assert_eq!(u.num_pairs(), 6);
    }

    proptest! {
        #[test]
        fn edge_list_roundtrip(
            directed in proptest::bool::ANY,
            edges in proptest::collection::vec((0u32..12, 0u32..12, 1u64..50), 0..40)
        ) {
            let mut g = ObservedGraph::new(12, directed, true);
            for &(i, j, c) in &edges {
                g.add_count(i, j, c).unwrap();
            }
            let f = tempfile::NamedTempFile::new().unwrap();
            g.write_edge_list(f.path()).unwrap();
            let back = ObservedGraph::read_edge_list(f.path(), 12, directed, true).unwrap();
            prop_assert_eq!(g, back);
        }
    }
}
