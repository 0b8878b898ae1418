//! The training loop: full-graph encoder forward per step, per-relation
//! supervision mini-batches with fresh negatives, Adam updates, and
//! validation-based model selection.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{
    build_csr, sample_negatives, EdgeSplit, MultimodalGraph, PairSet, Partition, RelationCsr,
    TaskRole, DEFAULT_MAX_RETRIES,
};
use crate::model::{
    build_posterior, kl_to_standard_normal, score_pairs, Architecture, ForwardInput, Latents,
    ParamBinder, RelationAdj, TrainConfig,
};
use crate::num::Scalar;
use crate::rng::SeedFan;
use crate::synth::normal_matrix;
use crate::tensor::{AdamConfig, AdamState, DenseMatrix, ParamStore, Tape};
use crate::train::eval::evaluate;
use crate::train::loss::{link_loss, squared_error_sum, sum_terms};
use crate::train::report::{EpochRow, TrainReport};

pub struct TrainOutcome<S> {
    pub params: ParamStore<S>,
    pub report: TrainReport,
}

/// Message-passing adjacencies for every encoded relation, with the
/// label-leakage check: the arcs of each CSR must be exactly the
/// expanded message edges, never supervision, validation, or test
/// edges.
pub fn build_adjacency<S: Scalar>(
    graph: &MultimodalGraph,
    split: &EdgeSplit,
    arch: &Architecture,
) -> Result<Vec<Option<RelationAdj<S>>>> {
    let mut out = Vec::with_capacity(graph.relations().len());
    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        if !arch.encoded[rel_idx] || spec.role == TaskRole::Supervised {
            out.push(None);
            continue;
        }
        let message: Vec<_> = split.per_relation[rel_idx]
            .message
            .iter()
            .map(|&e| graph.edges(rel_idx)[e])
            .collect();
        let csr = build_csr(graph, rel_idx, &message)?;
        assert_message_hygiene(graph, rel_idx, &csr, &message)?;
        out.push(Some(RelationAdj::from_csr(&csr)?));
    }
    Ok(out)
}

/// The CSR's off-diagonal arcs must equal the expanded message set.
fn assert_message_hygiene(
    graph: &MultimodalGraph,
    rel_idx: usize,
    csr: &RelationCsr,
    message: &[crate::graph::Edge],
) -> Result<()> {
    let spec = graph.relation(rel_idx);
    let mut expected: HashSet<(usize, usize)> = HashSet::new();
    match csr.block {
        crate::graph::CsrBlock::Single { .. } => {
            for e in message {
                if e.src == e.dst {
                    continue;
                }
                if spec.directed {
                    expected.insert((e.dst, e.src));
                } else {
                    expected.insert((e.src, e.dst));
                    expected.insert((e.dst, e.src));
                }
            }
        }
        crate::graph::CsrBlock::Union { src_count, .. } => {
            for e in message {
                expected.insert((e.src, src_count + e.dst));
                expected.insert((src_count + e.dst, e.src));
            }
        }
    }
    let actual: HashSet<(usize, usize)> = csr.message_arcs().into_iter().collect();
    if actual != expected {
        return Err(Error::Contract(format!(
            "relation '{}': encoder adjacency does not match the message split",
            spec.name
        )));
    }
    Ok(())
}

struct RelationBatch {
    rel_idx: usize,
    positives: Vec<(usize, usize)>,
    weights: Vec<f64>,
    negatives: Vec<(usize, usize)>,
}

pub fn train<S: Scalar>(
    graph: &MultimodalGraph,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    fingerprints: Option<&DenseMatrix<f64>>,
) -> Result<TrainOutcome<S>> {
    let arch = Architecture::resolve(graph, cfg)?;
    let params = arch.init_params(graph, cfg.seed)?;
    train_from_params(graph, split, cfg, fingerprints, params)
}

/// Training entry with caller-provided initial parameters (warm starts
/// and initialization experiments).
pub fn train_from_params<S: Scalar>(
    graph: &MultimodalGraph,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    fingerprints: Option<&DenseMatrix<f64>>,
    initial: ParamStore<S>,
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    split.validate(graph)?;
    let arch = Architecture::resolve(graph, cfg)?;
    let fan = SeedFan::new(cfg.seed);

    let adjacency = build_adjacency::<S>(graph, split, &arch)?;
    let fingerprints_s: Option<DenseMatrix<S>> = match (arch.d_fingerprint > 0, fingerprints) {
        (true, Some(fp)) => Some(fp.cast()),
        (true, None) => {
            return Err(Error::Config(
                "fingerprint augmentation enabled but the bundle has no fingerprints".into(),
            ));
        }
        (false, _) => None,
    };

    // Supervision positives per relation.
    let supervised: Vec<usize> = (0..graph.relations().len())
        .filter(|&r| arch.decode[r].is_some())
        .collect();
    if supervised.is_empty() {
        return Err(Error::Config("no supervised relation to train on".into()));
    }
    let mut train_pos: BTreeMap<usize, (Vec<(usize, usize)>, Vec<f64>)> = BTreeMap::new();
    for &rel_idx in &supervised {
        let list = &split.per_relation[rel_idx].train_supervision;
        if list.is_empty() {
            warn!(
                "relation '{}' has no supervision edges; skipped in training",
                graph.relation(rel_idx).name
            );
            continue;
        }
        let pairs: Vec<(usize, usize)> = list
            .iter()
            .map(|&e| {
                let edge = graph.edges(rel_idx)[e];
                (edge.src, edge.dst)
            })
            .collect();
        let weights: Vec<f64> = list
            .iter()
            .map(|&e| graph.edges(rel_idx)[e].weight.unwrap_or(0.0))
            .collect();
        train_pos.insert(rel_idx, (pairs, weights));
    }
    if train_pos.is_empty() {
        return Err(Error::Config("every supervised relation has an empty supervision split".into()));
    }
    let pair_sets: BTreeMap<usize, PairSet> = if cfg.task.is_regression() {
        BTreeMap::new()
    } else {
        train_pos.keys().map(|&r| (r, PairSet::full(graph, r))).collect()
    };

    let mut params = initial;
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr));

    let has_validation = supervised
        .iter()
        .any(|&r| !split.per_relation[r].validation.is_empty());
    if !has_validation {
        warn!("empty validation split: returning last-epoch parameters");
    }

    let mut best: Option<(f64, usize, ParamStore<S>)> = None;
    let mut rows: Vec<EpochRow> = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        // Shuffled positives and fresh (or frozen) negatives.
        let mut batches: Vec<RelationBatch> = Vec::new();
        for (&rel_idx, (pairs, weights)) in &train_pos {
            let name = &graph.relation(rel_idx).name;
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            {
                use rand::seq::SliceRandom;
                order.shuffle(&mut fan.stream(&format!("batch:{epoch}:{name}")));
            }
            let positives: Vec<(usize, usize)> = order.iter().map(|&i| pairs[i]).collect();
            let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
            let negatives = if cfg.task.is_regression() {
                Vec::new()
            } else {
                let neg_epoch = if cfg.freeze_negatives { 0 } else { epoch };
                let (_, dt) = graph.relation_endpoint_types(rel_idx);
                let mut rng = fan.stream(&format!("neg:{neg_epoch}:{name}"));
                sample_negatives(
                    name,
                    &positives,
                    &pair_sets[&rel_idx],
                    graph.node_type(dt).count(),
                    cfg.neg_ratio,
                    cfg.corruption,
                    &mut rng,
                    DEFAULT_MAX_RETRIES,
                )
            };
            batches.push(RelationBatch { rel_idx, positives, weights, negatives });
        }

        let steps = batches
            .iter()
            .map(|b| b.positives.len().div_ceil(cfg.batch_size))
            .max()
            .unwrap_or(0);

        let mut epoch_total = 0.0f64;
        let mut epoch_link = 0.0f64;
        let mut epoch_kl: BTreeMap<String, f64> = BTreeMap::new();
        for step in 0..steps {
            // Fresh reparameterization noise every forward pass, one
            // draw per Monte-Carlo sample of the reconstruction term.
            let noise: Vec<Vec<DenseMatrix<S>>> = match arch.mode {
                crate::model::ModelMode::Vgae => (0..cfg.noise_samples)
                    .map(|k| {
                        graph
                            .node_types()
                            .iter()
                            .map(|t| {
                                let mut rng = fan
                                    .stream(&format!("noise:{epoch}:{step}:{k}:{}", t.name));
                                normal_matrix(&mut rng, t.count(), arch.d_latent).cast()
                            })
                            .collect()
                    })
                    .collect(),
                crate::model::ModelMode::Gae => Vec::new(),
            };
            let step_result = run_step(
                graph,
                cfg,
                &arch,
                &adjacency,
                &noise,
                fingerprints_s.as_ref(),
                &batches,
                step,
                &params,
            );
            let (grads, total, link, kl) = step_result.map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::Numerical(format!("epoch {epoch}, step {step}: {msg}"))
                }
                other => other,
            })?;
            adam.step(&mut params, &grads)?;
            epoch_total += total;
            epoch_link += link;
            for (k, v) in kl {
                *epoch_kl.entry(k).or_insert(0.0) += v;
            }
        }

        let val_metric = if has_validation && (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.epochs)
        {
            let report = evaluate(
                graph,
                split,
                cfg,
                &arch,
                &params,
                &adjacency,
                fingerprints_s.as_ref(),
                Partition::Validation,
            )?;
            let value = report.selection_value();
            if let Some(v) = value {
                let improved = best.as_ref().map_or(true, |(b, _, _)| v > *b);
                if improved {
                    best = Some((v, epoch, params.clone()));
                }
            }
            value
        } else {
            None
        };

        rows.push(EpochRow {
            epoch,
            loss_total: epoch_total,
            loss_link: epoch_link,
            kl: epoch_kl,
            val_metric,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let (best_epoch, best_metric, final_params) = match best {
        Some((metric, epoch, stored)) => (Some(epoch), Some(metric), stored),
        None => (None, None, params),
    };
    let report = TrainReport {
        rows,
        best_epoch,
        best_metric,
        seed: cfg.seed,
        config_echo: cfg.echo(),
    };
    Ok(TrainOutcome { params: final_params, report })
}

/// One optimizer step: full forward, the step-th batch of every
/// relation scored under every noise sample, KL terms, backward.
/// Returns named gradients and the scalar loss decomposition (total,
/// link part, weighted KL per type).
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn run_step<S: Scalar>(
    graph: &MultimodalGraph,
    cfg: &TrainConfig,
    arch: &Architecture,
    adjacency: &[Option<RelationAdj<S>>],
    noise: &[Vec<DenseMatrix<S>>],
    fingerprints: Option<&DenseMatrix<S>>,
    batches: &[RelationBatch],
    step: usize,
    params: &ParamStore<S>,
) -> Result<(BTreeMap<String, DenseMatrix<S>>, f64, f64, BTreeMap<String, f64>)> {
    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(params);
    let input = ForwardInput { graph, adjacency, noise: None, fingerprints };
    let posterior = build_posterior(&mut tape, &mut binder, arch, &input)?;
    let samples: Vec<Latents> = if noise.is_empty() {
        vec![posterior.sample(&mut tape, None)?]
    } else {
        noise
            .iter()
            .map(|eps| posterior.sample(&mut tape, Some(eps)))
            .collect::<Result<_>>()?
    };
    let sample_weight = S::from_f64(1.0 / samples.len() as f64);

    let mut terms = Vec::new();
    let mut link_value = 0.0f64;
    for batch in batches {
        let lo = step * cfg.batch_size;
        if lo >= batch.positives.len() {
            continue;
        }
        let hi = (lo + cfg.batch_size).min(batch.positives.len());
        let pos = &batch.positives[lo..hi];

        // The reconstruction term averages over the noise samples.
        let mut sample_terms = Vec::with_capacity(samples.len());
        for latents in &samples {
            let term = if cfg.task.is_regression() {
                let pred =
                    score_pairs(&mut tape, &mut binder, arch, graph, latents, batch.rel_idx, pos)?;
                let truth = tape.constant(DenseMatrix::from_vec(
                    hi - lo,
                    1,
                    batch.weights[lo..hi].iter().map(|&w| S::from_f64(w)).collect(),
                )?);
                squared_error_sum(&mut tape, pred, truth)?
            } else {
                let nlo = lo * cfg.neg_ratio;
                let nhi = (hi * cfg.neg_ratio).min(batch.negatives.len());
                if nlo >= nhi {
                    warn!(
                        "relation '{}': no negatives for step {step}; batch skipped",
                        graph.relation(batch.rel_idx).name
                    );
                    break;
                }
                let neg = &batch.negatives[nlo..nhi];
                let pos_scores =
                    score_pairs(&mut tape, &mut binder, arch, graph, latents, batch.rel_idx, pos)?;
                let neg_scores =
                    score_pairs(&mut tape, &mut binder, arch, graph, latents, batch.rel_idx, neg)?;
                link_loss(&mut tape, pos_scores, neg_scores)?
            };
            sample_terms.push(term);
        }
        if sample_terms.len() != samples.len() {
            continue; // batch skipped for lack of negatives
        }
        let mut batch_term = sum_terms(&mut tape, &sample_terms)?;
        if samples.len() > 1 {
            batch_term = tape.scalar_mul(batch_term, sample_weight)?;
        }
        link_value += tape.value(batch_term).scalar_value()?.as_f64();
        terms.push(batch_term);
    }

    let mut kl_values = BTreeMap::new();
    if arch.mode == crate::model::ModelMode::Vgae {
        for (t, node_type) in graph.node_types().iter().enumerate() {
            let (mu, log_sigma) = posterior.heads[t];
            let Some(ls) = log_sigma else { continue };
            let lambda = cfg.lambda_for(&node_type.name);
            let kl = kl_to_standard_normal(&mut tape, mu, ls)?;
            let weighted = tape.scalar_mul(kl, S::from_f64(lambda))?;
            kl_values.insert(
                node_type.name.clone(),
                tape.value(weighted).scalar_value()?.as_f64(),
            );
            terms.push(weighted);
        }
    }

    let total = sum_terms(&mut tape, &terms)?;
    let total_value = tape.value(total).scalar_value()?.as_f64();
    if !total_value.is_finite() {
        return Err(Error::Numerical("non-finite loss".into()));
    }

    let grads = tape.backward(total)?;
    let mut named = BTreeMap::new();
    for (name, &node) in binder.bindings() {
        if let Some(g) = grads.get(node) {
            named.insert(name.clone(), g.clone());
        }
    }
    Ok((named, total_value, link_value, kl_values))
}
