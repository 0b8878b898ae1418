//! Multimodal graph data model: node-type registry, relation registry,
//! per-relation edge sets, and per-type node features.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// How a relation participates in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskRole {
    /// Edges feed the encoder only; never supervised or evaluated.
    MessagePassing,
    /// Edges are supervision labels only; never propagated.
    Supervised,
    /// Edges are split between message passing and supervision.
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub src_type: String,
    pub dst_type: String,
    pub directed: bool,
    pub role: TaskRole,
}

impl RelationSpec {
    pub fn is_same_type(&self) -> bool {
        self.src_type == self.dst_type
    }
}

/// The declared relations of a dataset. Serialized as a JSON list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub relations: Vec<RelationSpec>,
}

impl Schema {
    pub fn new(relations: Vec<RelationSpec>) -> Result<Self> {
        let schema = Self { relations };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for rel in &self.relations {
            if !seen.insert(rel.name.as_str()) {
                return Err(Error::Schema(format!("duplicate relation name '{}'", rel.name)));
            }
            if rel.is_same_type() && rel.directed && rel.role != TaskRole::MessagePassing {
                // Same-type supervised relations are scored symmetrically;
                // nothing forbids directed ones, so only sanity-check names.
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)
            .map_err(|e| Error::Schema(format!("invalid schema json: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Per-type node features.
#[derive(Debug, Clone)]
pub enum FeatureSpec {
    /// Identity features; never materialized. The first encoder layer
    /// treats one-hot x W as a row lookup into W.
    OneHot,
    /// Dense per-node feature rows, aligned with dense node indices.
    Dense(DenseMatrix<f64>),
    /// Fingerprint-backed 0/1 rows, aligned with dense node indices.
    Fingerprint(DenseMatrix<f64>),
}

impl FeatureSpec {
    /// Feature dimensionality given the node count of the type.
    pub fn dim(&self, node_count: usize) -> usize {
        match self {
            FeatureSpec::OneHot => node_count,
            FeatureSpec::Dense(m) | FeatureSpec::Fingerprint(m) => m.cols(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeatureSpec::OneHot => "one-hot",
            FeatureSpec::Dense(_) => "dense",
            FeatureSpec::Fingerprint(_) => "fingerprint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NodeType {
    pub name: String,
    /// External id per dense index, in first-seen order.
    pub ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeType {
    fn new(name: String) -> Self {
        Self { name, ids: Vec::new(), index: HashMap::new() }
    }

    pub fn count(&self) -> usize {
        self.ids.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }
}

#[derive(Debug, Clone)]
pub struct MultimodalGraph {
    node_types: Vec<NodeType>,
    type_index: HashMap<String, usize>,
    relations: Vec<RelationSpec>,
    /// Resolved (src type index, dst type index) per relation.
    relation_types: Vec<(usize, usize)>,
    /// Edge lists per relation; undirected same-type edges are stored
    /// canonically with src <= dst.
    edges: Vec<Vec<Edge>>,
    features: Vec<FeatureSpec>,
}

impl MultimodalGraph {
    /// Empty graph over a schema. Node types are declared up front from
    /// the relation endpoints; ids are interned as edges arrive.
    pub fn new(schema: &Schema) -> Result<Self> {
        schema.validate()?;
        let mut node_types: Vec<NodeType> = Vec::new();
        let mut type_index = HashMap::new();
        let declare = |name: &str, node_types: &mut Vec<NodeType>, type_index: &mut HashMap<String, usize>| {
            if !type_index.contains_key(name) {
                type_index.insert(name.to_string(), node_types.len());
                node_types.push(NodeType::new(name.to_string()));
            }
        };
        for rel in &schema.relations {
            declare(&rel.src_type, &mut node_types, &mut type_index);
            declare(&rel.dst_type, &mut node_types, &mut type_index);
        }
        let relation_types = schema
            .relations
            .iter()
            .map(|r| (type_index[&r.src_type], type_index[&r.dst_type]))
            .collect();
        let n_types = node_types.len();
        let n_rels = schema.relations.len();
        Ok(Self {
            node_types,
            type_index,
            relations: schema.relations.clone(),
            relation_types,
            edges: vec![Vec::new(); n_rels],
            features: vec![FeatureSpec::OneHot; n_types],
        })
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn node_type(&self, idx: usize) -> &NodeType {
        &self.node_types[idx]
    }

    pub fn type_id(&self, name: &str) -> Result<usize> {
        self.type_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup { kind: "node type", name: name.to_string() })
    }

    pub fn relations(&self) -> &[RelationSpec] {
        &self.relations
    }

    pub fn relation(&self, idx: usize) -> &RelationSpec {
        &self.relations[idx]
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::Lookup { kind: "relation", name: name.to_string() })
    }

    /// (src type index, dst type index) of a relation.
    pub fn relation_endpoint_types(&self, rel: usize) -> (usize, usize) {
        self.relation_types[rel]
    }

    pub fn edges(&self, rel: usize) -> &[Edge] {
        &self.edges[rel]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn features(&self, type_idx: usize) -> &FeatureSpec {
        &self.features[type_idx]
    }

    pub fn feature_dim(&self, type_idx: usize) -> usize {
        self.features[type_idx].dim(self.node_types[type_idx].count())
    }

    pub fn set_features(&mut self, type_idx: usize, features: FeatureSpec) -> Result<()> {
        if let FeatureSpec::Dense(m) | FeatureSpec::Fingerprint(m) = &features {
            if m.rows() != self.node_types[type_idx].count() {
                return Err(Error::Config(format!(
                    "feature matrix for type '{}' has {} rows, expected {}",
                    self.node_types[type_idx].name,
                    m.rows(),
                    self.node_types[type_idx].count()
                )));
            }
        }
        self.features[type_idx] = features;
        Ok(())
    }

    pub(crate) fn intern_node(&mut self, type_idx: usize, id: &str) -> usize {
        self.node_types[type_idx].intern(id)
    }

    pub(crate) fn push_edge(&mut self, rel: usize, edge: Edge) {
        self.edges[rel].push(edge);
    }

    /// Canonical form of a pair under a relation: undirected same-type
    /// pairs are ordered (min, max).
    pub fn canonical_pair(&self, rel: usize, src: usize, dst: usize) -> (usize, usize) {
        let spec = &self.relations[rel];
        if spec.is_same_type() && !spec.directed && src > dst {
            (dst, src)
        } else {
            (src, dst)
        }
    }

    /// Graph-wide invariant check; cheap enough to run after loading.
    pub fn validate(&self) -> Result<()> {
        for (rel_idx, edges) in self.edges.iter().enumerate() {
            let (st, dt) = self.relation_types[rel_idx];
            let (ns, nd) = (self.node_types[st].count(), self.node_types[dt].count());
            let spec = &self.relations[rel_idx];
            let mut seen = std::collections::HashSet::with_capacity(edges.len());
            for e in edges {
                if e.src >= ns || e.dst >= nd {
                    return Err(Error::Contract(format!(
                        "relation '{}': edge ({}, {}) out of bounds",
                        spec.name, e.src, e.dst
                    )));
                }
                if let Some(w) = e.weight {
                    if !w.is_finite() {
                        return Err(Error::Contract(format!(
                            "relation '{}': non-finite weight",
                            spec.name
                        )));
                    }
                }
                if spec.is_same_type() && !spec.directed && e.src > e.dst {
                    return Err(Error::Contract(format!(
                        "relation '{}': undirected edge not stored canonically",
                        spec.name
                    )));
                }
                if !seen.insert((e.src, e.dst)) {
                    return Err(Error::Contract(format!(
                        "relation '{}': duplicate edge ({}, {})",
                        spec.name, e.src, e.dst
                    )));
                }
            }
        }
        Ok(())
    }
}
