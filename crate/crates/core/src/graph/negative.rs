//! Negative sampling by tail (or, behind a flag, head) corruption.

use std::collections::HashSet;

use log::warn;
use rand::Rng;

use crate::graph::types::MultimodalGraph;

/// Which endpoint of a positive triplet gets corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorruptionSide {
    #[default]
    Tail,
    Head,
}

/// Canonical positive-pair set of one relation, used to reject
/// sampled negatives that are actually edges.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pairs: HashSet<(u32, u32)>,
    canonical: bool,
}

impl PairSet {
    /// Collect every edge of a relation across all partitions.
    pub fn full(graph: &MultimodalGraph, rel_idx: usize) -> Self {
        let spec = graph.relation(rel_idx);
        let canonical = spec.is_same_type() && !spec.directed;
        let mut pairs = HashSet::with_capacity(graph.edges(rel_idx).len());
        for e in graph.edges(rel_idx) {
            pairs.insert((e.src as u32, e.dst as u32));
        }
        Self { pairs, canonical }
    }

    pub fn contains(&self, src: usize, dst: usize) -> bool {
        let (a, b) = if self.canonical && src > dst { (dst, src) } else { (src, dst) };
        self.pairs.contains(&(a as u32, b as u32))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// For each positive (i, j), draw `n_per_positive` corrupted pairs
/// uniformly over the corrupted side's node range, rejecting known
/// positives. A positive whose candidate pool is exhausted is skipped
/// after `max_retries` draws, with a warning.
pub fn sample_negatives(
    rel_name: &str,
    positives: &[(usize, usize)],
    all_positives: &PairSet,
    candidate_count: usize,
    n_per_positive: usize,
    side: CorruptionSide,
    rng: &mut impl Rng,
    max_retries: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(positives.len() * n_per_positive);
    if candidate_count == 0 {
        return out;
    }
    let mut skipped = 0usize;
    for &(src, dst) in positives {
        for _ in 0..n_per_positive {
            let mut found = false;
            for _ in 0..max_retries {
                let candidate = rng.gen_range(0..candidate_count);
                let (ns, nd) = match side {
                    CorruptionSide::Tail => (src, candidate),
                    CorruptionSide::Head => (candidate, dst),
                };
                if !all_positives.contains(ns, nd) {
                    out.push((ns, nd));
                    found = true;
                    break;
                }
            }
            if !found {
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        warn!(
            "relation '{rel_name}': skipped {skipped} negative draw(s) after {max_retries} retries"
        );
    }
    out
}

pub const DEFAULT_MAX_RETRIES: usize = 100;
