//! Deterministic per-relation edge splitting into message-passing,
//! supervision, validation, and test partitions.

use std::fmt;

use log::warn;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::types::{MultimodalGraph, TaskRole};
use crate::rng::SeedFan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Message,
    TrainSupervision,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 4] = [
        Partition::Message,
        Partition::TrainSupervision,
        Partition::Validation,
        Partition::Test,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "message" => Some(Partition::Message),
            "train" => Some(Partition::TrainSupervision),
            "val" => Some(Partition::Validation),
            "test" => Some(Partition::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Partition::Message => "message",
            Partition::TrainSupervision => "train",
            Partition::Validation => "val",
            Partition::Test => "test",
        };
        write!(f, "{s}")
    }
}

/// Split ratios. `train`/`val`/`test` partition each relation's edges;
/// the train share is further divided into message-passing and
/// supervision edges by `message_frac`.
#[derive(Debug, Clone, Copy)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub message_frac: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1, message_frac: 0.8 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        if self.train <= 0.0 || self.val < 0.0 || self.test < 0.0 {
            return Err(Error::Config("split ratios must be positive".into()));
        }
        if ((self.train + self.val + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("split ratios must sum to 1".into()));
        }
        if !(0.0..=1.0).contains(&self.message_frac) {
            return Err(Error::Config("message fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Edge indices (into the relation's edge list) per partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationSplit {
    pub message: Vec<usize>,
    pub train_supervision: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl RelationSplit {
    pub fn list(&self, p: Partition) -> &[usize] {
        match p {
            Partition::Message => &self.message,
            Partition::TrainSupervision => &self.train_supervision,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }

    pub fn list_mut(&mut self, p: Partition) -> &mut Vec<usize> {
        match p {
            Partition::Message => &mut self.message,
            Partition::TrainSupervision => &mut self.train_supervision,
            Partition::Validation => &mut self.validation,
            Partition::Test => &mut self.test,
        }
    }

    pub fn total(&self) -> usize {
        Partition::ALL.iter().map(|&p| self.list(p).len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub seed: u64,
    pub per_relation: Vec<RelationSplit>,
}

impl EdgeSplit {
    /// Verify the partition property against a graph: the four lists
    /// partition every relation's edge indices.
    pub fn validate(&self, graph: &MultimodalGraph) -> Result<()> {
        if self.per_relation.len() != graph.relations().len() {
            return Err(Error::Contract("split relation count mismatch".into()));
        }
        for (rel_idx, rs) in self.per_relation.iter().enumerate() {
            let n = graph.edges(rel_idx).len();
            let mut seen = vec![false; n];
            for &p in &Partition::ALL {
                for &e in rs.list(p) {
                    if e >= n {
                        return Err(Error::Contract(format!(
                            "relation '{}': split references edge {} of {}",
                            graph.relation(rel_idx).name,
                            e,
                            n
                        )));
                    }
                    if seen[e] {
                        return Err(Error::Contract(format!(
                            "relation '{}': edge {} assigned to two partitions",
                            graph.relation(rel_idx).name,
                            e
                        )));
                    }
                    seen[e] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::Contract(format!(
                    "relation '{}': split does not cover all edges",
                    graph.relation(rel_idx).name
                )));
            }
        }
        Ok(())
    }
}

/// Boundary after cumulative-ratio rounding: round(ratio_sum * n).
fn boundary(ratio_sum: f64, n: usize) -> usize {
    ((ratio_sum * n as f64).round() as usize).min(n)
}

/// Split every relation independently. Undirected edges are stored
/// canonically, so both orientations move between partitions as one
/// unit by construction. The same seed always yields the same split.
pub fn split_edges(graph: &MultimodalGraph, ratios: &SplitRatios, seed: u64) -> Result<EdgeSplit> {
    ratios.validate()?;
    let fan = SeedFan::new(seed);
    let mut per_relation = Vec::with_capacity(graph.relations().len());

    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        let n = graph.edges(rel_idx).len();
        let mut rs = RelationSplit::default();
        if spec.role == TaskRole::MessagePassing {
            rs.message = (0..n).collect();
            per_relation.push(rs);
            continue;
        }
        if n < Partition::ALL.len() {
            if n > 0 {
                warn!(
                    "relation '{}' has only {} edge(s); all assigned to message passing",
                    spec.name, n
                );
            }
            rs.message = (0..n).collect();
            per_relation.push(rs);
            continue;
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut fan.stream(&format!("split:{}", spec.name)));

        let b_train = boundary(ratios.train, n);
        let b_val = boundary(ratios.train + ratios.val, n);
        let (train, rest) = order.split_at(b_train);
        let (val, test) = rest.split_at(b_val - b_train);

        let message_count = match spec.role {
            TaskRole::Supervised => 0,
            _ => boundary(ratios.message_frac, train.len()),
        };
        rs.message = train[..message_count].to_vec();
        rs.train_supervision = train[message_count..].to_vec();
        rs.validation = val.to_vec();
        rs.test = test.to_vec();
        for &p in &Partition::ALL {
            rs.list_mut(p).sort_unstable();
        }
        per_relation.push(rs);
    }

    let split = EdgeSplit { seed, per_relation };
    split.validate(graph)?;
    Ok(split)
}
