//! Tape-building forward passes: the two-layer relational graph
//! convolution encoder, per-type variational latent heads, fingerprint
//! augmentation, and the three decoders.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{CsrBlock, MultimodalGraph, RelationCsr};
use crate::model::arch::{
    bilinear_weight, dedicom_diag, enc_weight, latent_weight, mlp_head_bias, mlp_head_weight,
    mlp_trunk_bias, mlp_trunk_weight, Architecture, DecodeKind, DEDICOM_CORE, FP_PROJECTION,
};
use crate::model::config::{DecoderKind, ModelMode};
use crate::num::Scalar;
use crate::tensor::{sigmoid_scalar, DenseMatrix, NodeId, ParamStore, SparseMatrix, Tape};

/// Message-passing adjacency of one relation, ready for the tape.
#[derive(Clone)]
pub struct RelationAdj<S> {
    pub sparse: Arc<SparseMatrix<S>>,
    pub block: CsrBlock,
}

impl<S: Scalar> RelationAdj<S> {
    pub fn from_csr(csr: &RelationCsr) -> Result<Self> {
        Ok(Self { sparse: Arc::new(csr.to_sparse()?), block: csr.block })
    }
}

/// Per-type node features as tape inputs. One-hot features are never
/// materialized: one-hot times W is W itself.
#[derive(Clone, Copy)]
pub enum FeatureNodes {
    OneHot,
    Dense(NodeId),
}

/// Binds parameters onto the tape on first use and remembers the
/// node of each, so gradients can be mapped back to names.
pub struct ParamBinder<'a, S> {
    params: &'a ParamStore<S>,
    bound: BTreeMap<String, NodeId>,
}

impl<'a, S: Scalar> ParamBinder<'a, S> {
    pub fn new(params: &'a ParamStore<S>) -> Self {
        Self { params, bound: BTreeMap::new() }
    }

    pub fn get(&mut self, tape: &mut Tape<S>, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.bound.get(name) {
            return Ok(id);
        }
        let value = self.params.get(name)?.clone();
        let id = tape.var(value);
        self.bound.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn bindings(&self) -> &BTreeMap<String, NodeId> {
        &self.bound
    }

    pub fn into_bindings(self) -> BTreeMap<String, NodeId> {
        self.bound
    }
}

/// Latent state of one node type.
pub struct TypeLatent {
    pub mu: NodeId,
    pub log_sigma: Option<NodeId>,
    /// Sampled (or deterministic) latent, before augmentation.
    pub z: NodeId,
    /// Decoder-facing latent, fingerprint block included on the focus type.
    pub z_decode: NodeId,
}

pub struct Latents {
    pub per_type: Vec<TypeLatent>,
}

/// Everything the forward pass needs besides parameters.
pub struct ForwardInput<'a, S> {
    pub graph: &'a MultimodalGraph,
    /// Aligned with relations; None when the relation is not encoded.
    pub adjacency: &'a [Option<RelationAdj<S>>],
    /// Reparameterization noise per node type; None means evaluation
    /// mode (z = mu).
    pub noise: Option<&'a [DenseMatrix<S>]>,
    /// Fingerprint rows of the focus type, required when the
    /// architecture augments with fingerprints.
    pub fingerprints: Option<&'a DenseMatrix<S>>,
}

fn feature_nodes<S: Scalar>(
    tape: &mut Tape<S>,
    graph: &MultimodalGraph,
) -> Vec<FeatureNodes> {
    graph
        .node_types()
        .iter()
        .enumerate()
        .map(|(t, _)| match graph.features(t) {
            crate::graph::FeatureSpec::OneHot => FeatureNodes::OneHot,
            crate::graph::FeatureSpec::Dense(m) | crate::graph::FeatureSpec::Fingerprint(m) => {
                FeatureNodes::Dense(tape.constant(m.cast()))
            }
        })
        .collect()
}

/// x W, with the one-hot shortcut.
fn transform<S: Scalar>(
    tape: &mut Tape<S>,
    features: FeatureNodes,
    weight: NodeId,
) -> Result<NodeId> {
    match features {
        FeatureNodes::OneHot => Ok(weight),
        FeatureNodes::Dense(x) => tape.matmul(x, weight),
    }
}

/// Two encoder layers over all encoded relations. Returns H per type.
pub fn encode<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    input: &ForwardInput<S>,
) -> Result<Vec<NodeId>> {
    let graph = input.graph;
    let n_types = graph.node_types().len();
    let mut features: Vec<FeatureNodes> = feature_nodes(tape, graph);

    let mut hidden: Vec<NodeId> = Vec::new();
    for layer in 1..=2 {
        let out_dim = if layer == 1 { arch.d_hidden } else { arch.d_encoder };
        let mut accum: Vec<Option<NodeId>> = vec![None; n_types];
        for (rel_idx, adj) in input.adjacency.iter().enumerate() {
            let Some(adj) = adj else { continue };
            let spec = graph.relation(rel_idx);
            match adj.block {
                CsrBlock::Single { type_idx, .. } => {
                    let w = binder.get(tape, &enc_weight(layer, &spec.name, None))?;
                    let y = transform(tape, features[type_idx], w)?;
                    let u = tape.spmm(adj.sparse.clone(), y)?;
                    accum[type_idx] = Some(match accum[type_idx] {
                        Some(acc) => tape.add(acc, u)?,
                        None => u,
                    });
                }
                CsrBlock::Union { src_type, dst_type, src_count, dst_count } => {
                    let w_fwd = binder.get(tape, &enc_weight(layer, &spec.name, Some(true)))?;
                    let w_bwd = binder.get(tape, &enc_weight(layer, &spec.name, Some(false)))?;
                    let y_src = transform(tape, features[src_type], w_fwd)?;
                    let y_dst = transform(tape, features[dst_type], w_bwd)?;
                    let stacked = tape.concat_rows(y_src, y_dst)?;
                    let u = tape.spmm(adj.sparse.clone(), stacked)?;
                    let src_rows = Arc::new((0..src_count).collect::<Vec<_>>());
                    let dst_rows =
                        Arc::new((src_count..src_count + dst_count).collect::<Vec<_>>());
                    let u_src = tape.gather_rows(u, src_rows)?;
                    let u_dst = tape.gather_rows(u, dst_rows)?;
                    accum[src_type] = Some(match accum[src_type] {
                        Some(acc) => tape.add(acc, u_src)?,
                        None => u_src,
                    });
                    accum[dst_type] = Some(match accum[dst_type] {
                        Some(acc) => tape.add(acc, u_dst)?,
                        None => u_dst,
                    });
                }
            }
        }
        hidden = Vec::with_capacity(n_types);
        for (t, acc) in accum.into_iter().enumerate() {
            let pre = match acc {
                Some(node) => node,
                // A type untouched by any encoded relation carries no
                // signal; its embedding is all zeros.
                None => tape.constant(DenseMatrix::zeros(graph.node_type(t).count(), out_dim)),
            };
            hidden.push(tape.relu(pre)?);
        }
        features = hidden.iter().map(|&h| FeatureNodes::Dense(h)).collect();
    }
    Ok(hidden)
}

/// mu = tanh(h W1) W2 and log sigma likewise, the latter clamped.
fn latent_heads<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    type_name: &str,
    h: NodeId,
) -> Result<(NodeId, Option<NodeId>)> {
    let head = |tape: &mut Tape<S>, binder: &mut ParamBinder<S>, which: &str| -> Result<NodeId> {
        let w1 = binder.get(tape, &latent_weight(type_name, which, 1))?;
        let w2 = binder.get(tape, &latent_weight(type_name, which, 2))?;
        let t1 = tape.matmul(h, w1)?;
        let t1 = tape.tanh(t1)?;
        tape.matmul(t1, w2)
    };
    let mu = head(tape, binder, "mu")?;
    let log_sigma = match arch.mode {
        ModelMode::Vgae => {
            let raw = head(tape, binder, "sigma")?;
            let clamp = S::from_f64(arch.logstd_clamp);
            Some(tape.clamp(raw, -clamp, clamp)?)
        }
        ModelMode::Gae => None,
    };
    Ok((mu, log_sigma))
}

/// z = mu + exp(log sigma) * eps; evaluation mode uses z = mu.
pub fn reparameterize<S: Scalar>(
    tape: &mut Tape<S>,
    mu: NodeId,
    log_sigma: NodeId,
    eps: &DenseMatrix<S>,
) -> Result<NodeId> {
    let sigma = tape.exp(log_sigma)?;
    let eps = tape.constant(eps.clone());
    let scaled = tape.mul(sigma, eps)?;
    tape.add(mu, scaled)
}

/// Sum over nodes and dims of (mu^2 + sigma^2 - 1 - 2 log sigma) / 2,
/// the closed-form KL divergence to a standard normal prior.
pub fn kl_to_standard_normal<S: Scalar>(
    tape: &mut Tape<S>,
    mu: NodeId,
    log_sigma: NodeId,
) -> Result<NodeId> {
    let (rows, cols) = tape.value(mu).shape();
    let mu_sq = tape.square(mu)?;
    let mu_term = tape.sum(mu_sq)?;
    let sigma = tape.exp(log_sigma)?;
    let sigma_sq = tape.square(sigma)?;
    let sigma_term = tape.sum(sigma_sq)?;
    let ls_term = tape.sum(log_sigma)?;
    let half = S::from_f64(0.5);
    let a = tape.scalar_mul(mu_term, half)?;
    let b = tape.scalar_mul(sigma_term, half)?;
    let ab = tape.add(a, b)?;
    let abc = tape.sub(ab, ls_term)?;
    let count = tape.constant(DenseMatrix::scalar(S::from_f64((rows * cols) as f64 * 0.5)));
    tape.sub(abc, count)
}

/// Posterior heads of every node type plus the shared fingerprint
/// block; sampling is separate so one forward can draw many z's.
pub struct Posterior {
    pub heads: Vec<(NodeId, Option<NodeId>)>,
    pub fp_block: Option<NodeId>,
    focus_type: usize,
    mode: ModelMode,
}

impl Posterior {
    /// One latent sample: z = mu + exp(log sigma) * eps, or z = mu in
    /// evaluation mode (no noise given) and in GAE mode.
    pub fn sample<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        noise: Option<&[DenseMatrix<S>]>,
    ) -> Result<Latents> {
        let mut per_type = Vec::with_capacity(self.heads.len());
        for (t, &(mu, log_sigma)) in self.heads.iter().enumerate() {
            let z = match (self.mode, log_sigma, noise) {
                (ModelMode::Vgae, Some(ls), Some(noise)) => {
                    reparameterize(tape, mu, ls, &noise[t])?
                }
                _ => mu,
            };
            let z_decode = match (t == self.focus_type, self.fp_block) {
                (true, Some(block)) => tape.concat_cols(z, block)?,
                _ => z,
            };
            per_type.push(TypeLatent { mu, log_sigma, z, z_decode });
        }
        Ok(Latents { per_type })
    }
}

/// Encoder plus latent heads, without sampling.
pub fn build_posterior<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    input: &ForwardInput<S>,
) -> Result<Posterior> {
    let graph = input.graph;
    let hidden = encode(tape, binder, arch, input)?;

    // Fingerprint projection is shared by every focus-type latent.
    let fp_block = if arch.d_fingerprint > 0 {
        let fp = input.fingerprints.ok_or_else(|| {
            Error::Config("fingerprint augmentation enabled but no fingerprint matrix given".into())
        })?;
        if fp.rows() != graph.node_type(arch.focus_type).count() {
            return Err(Error::Config(format!(
                "fingerprint matrix has {} rows, focus type has {} nodes",
                fp.rows(),
                graph.node_type(arch.focus_type).count()
            )));
        }
        let fp_node = tape.constant(fp.clone());
        let wm = binder.get(tape, FP_PROJECTION)?;
        let proj = tape.matmul(fp_node, wm)?;
        Some(tape.tanh(proj)?)
    } else {
        None
    };

    let mut heads = Vec::with_capacity(graph.node_types().len());
    for (t, node_type) in graph.node_types().iter().enumerate() {
        let _ = t;
        heads.push(latent_heads(tape, binder, arch, &node_type.name, hidden[t])?);
    }
    Ok(Posterior { heads, fp_block, focus_type: arch.focus_type, mode: arch.mode })
}

/// Build latents for every node type (one sample).
pub fn build_latents<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    input: &ForwardInput<S>,
) -> Result<Latents> {
    let posterior = build_posterior(tape, binder, arch, input)?;
    posterior.sample(tape, input.noise)
}

/// Batched pair scoring of one relation: raw logits (classification)
/// or predicted weights (regression), shape (pairs, 1).
pub fn score_pairs<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    graph: &MultimodalGraph,
    latents: &Latents,
    rel_idx: usize,
    pairs: &[(usize, usize)],
) -> Result<NodeId> {
    let Some(kind) = arch.decode[rel_idx] else {
        return Err(Error::Capability(format!(
            "relation '{}' is message-passing only and has no decoder",
            graph.relation(rel_idx).name
        )));
    };
    let (st, dt) = graph.relation_endpoint_types(rel_idx);
    let is: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(i, _)| i).collect());
    let js: Arc<Vec<usize>> = Arc::new(pairs.iter().map(|&(_, j)| j).collect());
    let zi = tape.gather_rows(latents.per_type[st].z_decode, is)?;
    let zj = tape.gather_rows(latents.per_type[dt].z_decode, js)?;
    let rel_name = &graph.relation(rel_idx).name;

    match (kind, arch.decoder) {
        (DecodeKind::Focus, DecoderKind::Dedicom) => {
            decode_dedicom(tape, binder, rel_name, zi, zj)
        }
        (DecodeKind::Focus, DecoderKind::Mlp) => {
            decode_mlp(tape, binder, arch, rel_name, zi, zj)
        }
        (DecodeKind::Bilinear, _) => decode_bilinear(tape, binder, rel_name, zi, zj),
    }
}

/// score = z_i^T D_e (S + S^T) D_e z_j, batched over rows.
fn decode_dedicom<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    rel_name: &str,
    zi: NodeId,
    zj: NodeId,
) -> Result<NodeId> {
    let d = binder.get(tape, &dedicom_diag(rel_name))?;
    let s = binder.get(tape, DEDICOM_CORE)?;
    let st = tape.transpose(s)?;
    let r = tape.add(s, st)?;
    let zi_d = tape.mul_row(zi, d)?;
    let zj_d = tape.mul_row(zj, d)?;
    let left = tape.matmul(zi_d, r)?;
    let prod = tape.mul(left, zj_d)?;
    row_sum(tape, prod)
}

/// score = z_i^T M_e z_j, batched over rows.
fn decode_bilinear<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    rel_name: &str,
    zi: NodeId,
    zj: NodeId,
) -> Result<NodeId> {
    let m = binder.get(tape, &bilinear_weight(rel_name))?;
    let left = tape.matmul(zi, m)?;
    let prod = tape.mul(left, zj)?;
    row_sum(tape, prod)
}

/// Shared ReLU trunk over concat(z_i, z_j), per-relation scalar head.
fn decode_mlp<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut ParamBinder<S>,
    arch: &Architecture,
    rel_name: &str,
    zi: NodeId,
    zj: NodeId,
) -> Result<NodeId> {
    let mut x = tape.concat_cols(zi, zj)?;
    for i in 0..arch.mlp_hidden.len() {
        let w = binder.get(tape, &mlp_trunk_weight(i))?;
        let b = binder.get(tape, &mlp_trunk_bias(i))?;
        let lin = tape.matmul(x, w)?;
        let lin = tape.add_row(lin, b)?;
        x = tape.relu(lin)?;
    }
    let hw = binder.get(tape, &mlp_head_weight(rel_name))?;
    let hb = binder.get(tape, &mlp_head_bias(rel_name))?;
    let out = tape.matmul(x, hw)?;
    tape.add_row(out, hb)
}

/// Row-wise sum as a matmul with a ones column.
fn row_sum<S: Scalar>(tape: &mut Tape<S>, x: NodeId) -> Result<NodeId> {
    let cols = tape.value(x).cols();
    let ones = tape.constant(DenseMatrix::from_fn(cols, 1, |_, _| S::one()));
    tape.matmul(x, ones)
}

/// Elementwise logistic sigmoid over raw scores.
pub fn link_probability(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| sigmoid_scalar(s)).collect()
}
