//! Multimodal graph construction, validation, splitting, and negative
//! sampling.

pub mod csr;
pub mod load;
pub mod negative;
pub mod split;
pub mod types;

pub use csr::{build_csr, CsrBlock, RelationCsr};
pub use load::{attach_features, load_graph, load_graph_from_reader, load_graph_with_split, write_edges_tsv, FeatureMap};
pub use negative::{sample_negatives, CorruptionSide, PairSet, DEFAULT_MAX_RETRIES};
pub use split::{split_edges, EdgeSplit, Partition, RelationSplit, SplitRatios};
pub use types::{Edge, FeatureSpec, MultimodalGraph, NodeType, RelationSpec, Schema, TaskRole};
