//! Normalized sparse adjacency per relation, with explicit self-arcs.
//!
//! The encoder sums over each node's neighborhood including the node
//! itself, so every row carries a diagonal self-arc and degrees are
//! counted as (incident message edges) + 1. The coefficient stored on
//! arc (i, j) is 1/sqrt(c_i * c_j).
//!
//! Same-type relations produce a square matrix over that type's nodes.
//! Cross-type relations produce a square matrix over the stacked
//! [src-type; dst-type] index space, which lets messages flow in both
//! directions and gives every node its diagonal self-arc; the encoder
//! stacks the direction-specific transformed features the same way.

use crate::error::{Error, Result};
use crate::graph::types::{Edge, MultimodalGraph};
use crate::num::Scalar;
use crate::tensor::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrBlock {
    /// Rows and columns index one node type.
    Single { type_idx: usize, count: usize },
    /// Rows and columns index src-type nodes followed by dst-type nodes.
    Union { src_type: usize, dst_type: usize, src_count: usize, dst_count: usize },
}

impl CsrBlock {
    pub fn size(&self) -> usize {
        match *self {
            CsrBlock::Single { count, .. } => count,
            CsrBlock::Union { src_count, dst_count, .. } => src_count + dst_count,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelationCsr {
    pub block: CsrBlock,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    /// Symmetric-normalization coefficient per stored arc.
    pub coeffs: Vec<f64>,
    /// Edge weights per stored arc; self-arcs carry 1. Present only
    /// when the relation has weighted edges.
    pub weights: Option<Vec<f64>>,
}

impl RelationCsr {
    pub fn size(&self) -> usize {
        self.block.size()
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Arcs of one row as (column, coeff, weight).
    pub fn row_arcs(&self, r: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        span.map(move |k| {
            (
                self.col_indices[k],
                self.coeffs[k],
                self.weights.as_ref().map_or(1.0, |w| w[k]),
            )
        })
    }

    /// Off-diagonal arcs, i.e. the expanded message edges.
    pub fn message_arcs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.size() {
            for (c, _, _) in self.row_arcs(r) {
                if c != r {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.size();
        if self.row_offsets.len() != n + 1 || self.row_offsets[0] != 0 {
            return Err(Error::Contract("csr offsets malformed".into()));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Contract("csr offsets not monotone".into()));
        }
        if *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return Err(Error::Contract("csr offsets do not span arcs".into()));
        }
        if self.col_indices.iter().any(|&c| c >= n) {
            return Err(Error::Contract("csr column out of bounds".into()));
        }
        if self.coeffs.iter().any(|&c| !(c > 0.0 && c <= 1.0) || !c.is_finite()) {
            return Err(Error::Contract("csr coefficient outside (0, 1]".into()));
        }
        Ok(())
    }

    /// Materialize for the tape: one multiplier per arc, coeff * weight.
    pub fn to_sparse<S: Scalar>(&self) -> Result<SparseMatrix<S>> {
        let values: Vec<S> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let w = self.weights.as_ref().map_or(1.0, |w| w[k]);
                S::from_f64(c * w)
            })
            .collect();
        SparseMatrix::new(
            self.size(),
            self.size(),
            self.row_offsets.clone(),
            self.col_indices.clone(),
            values,
        )
    }
}

/// Build the normalized adjacency of one relation over the given
/// message edges. Isolated nodes yield a row holding only their
/// self-arc (coefficient 1).
pub fn build_csr(
    graph: &MultimodalGraph,
    rel_idx: usize,
    message_edges: &[Edge],
) -> Result<RelationCsr> {
    let spec = graph.relation(rel_idx);
    let (st, dt) = graph.relation_endpoint_types(rel_idx);
    let weighted = message_edges.iter().any(|e| e.weight.is_some());

    let (block, arcs) = if spec.is_same_type() {
        let count = graph.node_type(st).count();
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for e in message_edges {
            let w = e.weight.unwrap_or(1.0);
            if e.src == e.dst {
                // A data self-loop only deepens the diagonal degree;
                // the self-arc below already covers the propagation.
                continue;
            }
            if spec.directed {
                arcs.push((e.dst, e.src, w));
            } else {
                arcs.push((e.src, e.dst, w));
                arcs.push((e.dst, e.src, w));
            }
        }
        (CsrBlock::Single { type_idx: st, count }, arcs)
    } else {
        let src_count = graph.node_type(st).count();
        let dst_count = graph.node_type(dt).count();
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for e in message_edges {
            let w = e.weight.unwrap_or(1.0);
            let s = e.src;
            let d = src_count + e.dst;
            // Cross-type relations route messages in both directions.
            arcs.push((s, d, w));
            arcs.push((d, s, w));
        }
        (CsrBlock::Union { src_type: st, dst_type: dt, src_count, dst_count }, arcs)
    };

    let n = block.size();
    // Degree = incident message edges + 1 for the self-arc.
    let mut degree = vec![1usize; n];
    if spec.is_same_type() {
        for e in message_edges {
            degree[e.src] += 1;
            if e.src != e.dst {
                degree[e.dst] += 1;
            }
        }
    } else {
        let src_count = match block {
            CsrBlock::Union { src_count, .. } => src_count,
            CsrBlock::Single { .. } => unreachable!(),
        };
        for e in message_edges {
            degree[e.src] += 1;
            degree[src_count + e.dst] += 1;
        }
    }

    let mut rows: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
    for (r, c, w) in arcs {
        let coeff = 1.0 / ((degree[r] * degree[c]) as f64).sqrt();
        rows[r].push((c, coeff, w));
    }
    for (r, row) in rows.iter_mut().enumerate() {
        row.push((r, 1.0 / degree[r] as f64, 1.0));
        row.sort_unstable_by_key(|&(c, _, _)| c);
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut coeffs = Vec::new();
    let mut weights = Vec::new();
    row_offsets.push(0);
    for row in &rows {
        for &(c, coeff, w) in row {
            col_indices.push(c);
            coeffs.push(coeff);
            weights.push(w);
        }
        row_offsets.push(col_indices.len());
    }

    let csr = RelationCsr {
        block,
        row_offsets,
        col_indices,
        coeffs,
        weights: weighted.then_some(weights),
    };
    csr.validate()?;
    Ok(csr)
}
