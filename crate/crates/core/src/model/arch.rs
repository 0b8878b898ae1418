//! Model architecture resolved against a concrete graph: which
//! relations are encoded and decoded, every parameter's name and
//! shape, and seeded initialization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{MultimodalGraph, TaskRole};
use crate::model::config::{DecoderKind, ModelMode, TrainConfig};
use crate::num::Scalar;
use crate::rng::SeedFan;
use crate::tensor::{DenseMatrix, ParamStore};

/// Weight initialization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Zeros.
    Bias,
    /// Uniform fan-based with fan-in = rows.
    Glorot,
    /// Uniform fan-based with fan-in = 1: one-hot rows act as
    /// embeddings, only one input is active per node.
    Embedding,
    /// All ones: DEDICOM diagonals start as the identity scaling.
    Ones,
    /// Identity columns scaled by 1/2: the DEDICOM core starts as
    /// R = S + S^T = I, so scoring begins as a plain inner product and
    /// relation-specific structure is learned as a deviation. Random
    /// multiplicative factors here amplify early sampling noise enough
    /// to saturate the link loss.
    HalfIdentity,
}

/// How a supervised relation is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeKind {
    /// The configured focus decoder (DEDICOM or MLP).
    Focus,
    /// Per-relation bilinear form z_i^T M_e z_j.
    Bilinear,
}

#[derive(Debug, Clone)]
pub struct Architecture {
    pub mode: ModelMode,
    pub decoder: DecoderKind,
    pub d_hidden: usize,
    pub d_encoder: usize,
    pub d_latent: usize,
    /// Fingerprint projection width; 0 disables augmentation.
    pub d_fingerprint: usize,
    pub fp_width: usize,
    pub mlp_hidden: Vec<usize>,
    pub logstd_clamp: f64,
    /// Node type receiving the focus decoder and the fingerprint
    /// augmentation.
    pub focus_type: usize,
    /// Per relation: Some(kind) when supervised, None when the relation
    /// only passes messages.
    pub decode: Vec<Option<DecodeKind>>,
    /// Per relation: participates in the encoder.
    pub encoded: Vec<bool>,
    /// Input feature dimension per node type.
    pub feature_dims: Vec<usize>,
}

impl Architecture {
    pub fn resolve(graph: &MultimodalGraph, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let focus_type = match &cfg.focus_type {
            Some(name) => graph.type_id(name)?,
            None => pick_focus_type(graph)?,
        };

        let mut decode = Vec::with_capacity(graph.relations().len());
        let mut encoded = Vec::with_capacity(graph.relations().len());
        for (rel_idx, spec) in graph.relations().iter().enumerate() {
            encoded.push(spec.role != TaskRole::Supervised);
            let supervised = spec.role != TaskRole::MessagePassing;
            if !supervised {
                decode.push(None);
                continue;
            }
            let (st, dt) = graph.relation_endpoint_types(rel_idx);
            let kind = if cfg.task.is_regression() {
                // Regression scores every supervised relation with the MLP.
                DecodeKind::Focus
            } else if st == focus_type && dt == focus_type {
                DecodeKind::Focus
            } else {
                DecodeKind::Bilinear
            };
            decode.push(Some(kind));
        }

        let feature_dims = (0..graph.node_types().len()).map(|t| graph.feature_dim(t)).collect();
        let arch = Self {
            mode: cfg.mode,
            decoder: cfg.decoder,
            d_hidden: cfg.d_hidden,
            d_encoder: cfg.d_encoder,
            d_latent: cfg.d_latent,
            d_fingerprint: if cfg.fingerprints { cfg.d_fingerprint } else { 0 },
            fp_width: cfg.fp_width,
            mlp_hidden: cfg.mlp_hidden.clone(),
            logstd_clamp: cfg.logstd_clamp,
            focus_type,
            decode,
            encoded,
            feature_dims,
        };
        arch.check_mlp_dims(graph)?;
        Ok(arch)
    }

    /// Latent width of a node type as seen by decoders, including the
    /// fingerprint block on the focus type.
    pub fn z_dim(&self, type_idx: usize) -> usize {
        if type_idx == self.focus_type {
            self.d_latent + self.d_fingerprint
        } else {
            self.d_latent
        }
    }

    fn check_mlp_dims(&self, graph: &MultimodalGraph) -> Result<()> {
        if self.decoder != DecoderKind::Mlp {
            return Ok(());
        }
        let mut input_dim: Option<usize> = None;
        for (rel_idx, kind) in self.decode.iter().enumerate() {
            if *kind != Some(DecodeKind::Focus) {
                continue;
            }
            let (st, dt) = graph.relation_endpoint_types(rel_idx);
            let dim = self.z_dim(st) + self.z_dim(dt);
            match input_dim {
                None => input_dim = Some(dim),
                Some(d) if d != dim => {
                    return Err(Error::Config(format!(
                        "mlp decoder needs one trunk input width, found {d} and {dim}"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Trunk input width of the MLP decoder.
    pub fn mlp_input_dim(&self, graph: &MultimodalGraph) -> usize {
        for (rel_idx, kind) in self.decode.iter().enumerate() {
            if *kind == Some(DecodeKind::Focus) {
                let (st, dt) = graph.relation_endpoint_types(rel_idx);
                return self.z_dim(st) + self.z_dim(dt);
            }
        }
        2 * self.z_dim(self.focus_type)
    }

    /// Every parameter with its shape and initialization kind, in a
    /// deterministic order.
    pub fn parameter_shapes(&self, graph: &MultimodalGraph) -> Vec<(String, usize, usize, InitKind)> {
        let mut out = Vec::new();
        // Encoder weights per layer and relation (per direction for
        // cross-type relations). Layer-1 weights over one-hot features
        // are row lookups, so their effective fan-in is 1, not the
        // node count.
        for layer in 1..=2 {
            let out_dim = if layer == 1 { self.d_hidden } else { self.d_encoder };
            for (rel_idx, spec) in graph.relations().iter().enumerate() {
                if !self.encoded[rel_idx] {
                    continue;
                }
                let (st, dt) = graph.relation_endpoint_types(rel_idx);
                let in_dim = |t: usize| if layer == 1 { self.feature_dims[t] } else { self.d_hidden };
                let kind = |t: usize| {
                    if layer == 1 && matches!(graph.features(t), crate::graph::FeatureSpec::OneHot) {
                        InitKind::Embedding
                    } else {
                        InitKind::Glorot
                    }
                };
                if spec.is_same_type() {
                    out.push((enc_weight(layer, &spec.name, None), in_dim(st), out_dim, kind(st)));
                } else {
                    out.push((enc_weight(layer, &spec.name, Some(true)), in_dim(st), out_dim, kind(st)));
                    out.push((enc_weight(layer, &spec.name, Some(false)), in_dim(dt), out_dim, kind(dt)));
                }
            }
        }
        // Latent heads per node type.
        for t in graph.node_types() {
            out.push((latent_weight(&t.name, "mu", 1), self.d_encoder, self.d_encoder, InitKind::Glorot));
            out.push((latent_weight(&t.name, "mu", 2), self.d_encoder, self.d_latent, InitKind::Glorot));
            if self.mode == ModelMode::Vgae {
                out.push((latent_weight(&t.name, "sigma", 1), self.d_encoder, self.d_encoder, InitKind::Glorot));
                out.push((latent_weight(&t.name, "sigma", 2), self.d_encoder, self.d_latent, InitKind::Glorot));
            }
        }
        // Fingerprint projection.
        if self.d_fingerprint > 0 {
            out.push((FP_PROJECTION.to_string(), self.fp_width, self.d_fingerprint, InitKind::Glorot));
        }
        // Decoders.
        let focus_dim = self.z_dim(self.focus_type);
        let mut any_focus = false;
        let mut any_bilinear = Vec::new();
        for (rel_idx, kind) in self.decode.iter().enumerate() {
            match kind {
                Some(DecodeKind::Focus) => {
                    any_focus = true;
                    let name = &graph.relation(rel_idx).name;
                    match self.decoder {
                        DecoderKind::Dedicom => {
                            out.push((dedicom_diag(name), 1, focus_dim, InitKind::Ones));
                        }
                        DecoderKind::Mlp => {
                            let h_last = *self.mlp_hidden.last().unwrap();
                            out.push((mlp_head_weight(name), h_last, 1, InitKind::Glorot));
                            out.push((mlp_head_bias(name), 1, 1, InitKind::Bias));
                        }
                    }
                }
                Some(DecodeKind::Bilinear) => any_bilinear.push(rel_idx),
                None => {}
            }
        }
        if any_focus && self.decoder == DecoderKind::Dedicom {
            out.push((DEDICOM_CORE.to_string(), focus_dim, focus_dim, InitKind::HalfIdentity));
        }
        if any_focus && self.decoder == DecoderKind::Mlp {
            let mut prev = self.mlp_input_dim(graph);
            for (i, &h) in self.mlp_hidden.iter().enumerate() {
                out.push((mlp_trunk_weight(i), prev, h, InitKind::Glorot));
                out.push((mlp_trunk_bias(i), 1, h, InitKind::Bias));
                prev = h;
            }
        }
        for rel_idx in any_bilinear {
            let (st, dt) = graph.relation_endpoint_types(rel_idx);
            out.push((
                bilinear_weight(&graph.relation(rel_idx).name),
                self.z_dim(st),
                self.z_dim(dt),
                InitKind::Glorot,
            ));
        }
        out
    }

    /// Glorot-uniform weights and zero biases, each parameter drawn
    /// from its own named stream so values do not depend on creation
    /// order. Initialization always happens in f64 and is cast down,
    /// keeping f32 and f64 runs aligned at step zero.
    pub fn init_params<S: Scalar>(&self, graph: &MultimodalGraph, seed: u64) -> Result<ParamStore<S>> {
        let fan = SeedFan::new(seed);
        let mut params = ParamStore::new();
        for (name, rows, cols, kind) in self.parameter_shapes(graph) {
            let matrix = match kind {
                InitKind::Bias => DenseMatrix::zeros(rows, cols),
                InitKind::Ones => DenseMatrix::from_fn(rows, cols, |_, _| S::one()),
                InitKind::HalfIdentity => DenseMatrix::from_fn(rows, cols, |r, c| {
                    if r == c { S::from_f64(0.5) } else { S::zero() }
                }),
                InitKind::Glorot | InitKind::Embedding => {
                    let fan_in = if kind == InitKind::Embedding { 1 } else { rows };
                    let bound = (6.0 / (fan_in + cols) as f64).sqrt();
                    let mut rng = fan.stream(&format!("init:{name}"));
                    let mut m = DenseMatrix::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            m.set(r, c, S::from_f64(rng.gen_range(-bound..=bound)));
                        }
                    }
                    m
                }
            };
            params.insert(name, matrix)?;
        }
        Ok(params)
    }
}

/// Focus type default: the type with the most same-type supervised
/// relations, falling back to the src type of the first supervised
/// relation.
fn pick_focus_type(graph: &MultimodalGraph) -> Result<usize> {
    let mut counts = vec![0usize; graph.node_types().len()];
    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        if spec.role == TaskRole::MessagePassing {
            continue;
        }
        let (st, dt) = graph.relation_endpoint_types(rel_idx);
        if st == dt {
            counts[st] += 1;
        }
    }
    if let Some((best, &n)) = counts.iter().enumerate().max_by_key(|&(_, &n)| n) {
        if n > 0 {
            return Ok(best);
        }
    }
    graph
        .relations()
        .iter()
        .enumerate()
        .find(|(_, s)| s.role != TaskRole::MessagePassing)
        .map(|(i, _)| graph.relation_endpoint_types(i).0)
        .ok_or_else(|| Error::Config("no supervised relation in the schema".into()))
}

pub const DEDICOM_CORE: &str = "dec.dedicom.s";
pub const FP_PROJECTION: &str = "dec.fp.wm";

pub fn enc_weight(layer: usize, rel: &str, forward: Option<bool>) -> String {
    match forward {
        None => format!("enc.l{layer}.{rel}"),
        Some(true) => format!("enc.l{layer}.{rel}.fwd"),
        Some(false) => format!("enc.l{layer}.{rel}.bwd"),
    }
}

pub fn latent_weight(type_name: &str, head: &str, layer: usize) -> String {
    format!("lat.{type_name}.{head}.w{layer}")
}

pub fn dedicom_diag(rel: &str) -> String {
    format!("dec.dedicom.d.{rel}")
}

pub fn bilinear_weight(rel: &str) -> String {
    format!("dec.bilinear.{rel}")
}

pub fn mlp_trunk_weight(i: usize) -> String {
    format!("dec.mlp.w{i}")
}

pub fn mlp_trunk_bias(i: usize) -> String {
    format!("dec.mlp.b{i}")
}

pub fn mlp_head_weight(rel: &str) -> String {
    format!("dec.mlp.head.{rel}.w")
}

pub fn mlp_head_bias(rel: &str) -> String {
    format!("dec.mlp.head.{rel}.b")
}
