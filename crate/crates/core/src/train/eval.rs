//! Deterministic evaluation: eval-mode forward (z = mu), frozen 1:1
//! negatives per relation, per-relation metrics, macro averages.

use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{
    sample_negatives, EdgeSplit, MultimodalGraph, PairSet, Partition, DEFAULT_MAX_RETRIES,
};
use crate::metrics::{
    accuracy, ap_at_k, auprc, auroc, macro_average, regression_suite, MacroSummary,
    RegressionMetrics,
};
use crate::model::{
    build_latents, link_probability, score_pairs, Architecture, ForwardInput, ParamBinder,
    RelationAdj, TrainConfig,
};
use crate::num::Scalar;
use crate::rng::SeedFan;
use crate::tensor::{DenseMatrix, ParamStore, Tape};

pub const AP_K: usize = 50;

#[derive(Debug, Clone)]
pub struct ClassRow {
    pub relation: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub ap50: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RegRow {
    pub relation: String,
    pub n: usize,
    pub metrics: Option<RegressionMetrics>,
}

#[derive(Debug, Clone)]
pub enum EvalRows {
    Classification(Vec<ClassRow>),
    Regression(Vec<RegRow>),
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub split: Partition,
    pub rows: EvalRows,
}

impl EvalReport {
    pub fn macro_auroc(&self) -> Result<MacroSummary> {
        self.macro_class(|r| r.auroc)
    }

    pub fn macro_auprc(&self) -> Result<MacroSummary> {
        self.macro_class(|r| r.auprc)
    }

    pub fn macro_ap50(&self) -> Result<MacroSummary> {
        self.macro_class(|r| r.ap50)
    }

    pub fn macro_accuracy(&self) -> Result<MacroSummary> {
        self.macro_class(|r| r.accuracy)
    }

    fn macro_class(&self, pick: impl Fn(&ClassRow) -> Option<f64>) -> Result<MacroSummary> {
        match &self.rows {
            EvalRows::Classification(rows) => {
                let values: Vec<Option<f64>> = rows.iter().map(pick).collect();
                macro_average(&values)
            }
            EvalRows::Regression(_) => {
                Err(Error::Contract("classification metric on a regression report".into()))
            }
        }
    }

    pub fn macro_regression(&self) -> Result<(MacroSummary, MacroSummary, MacroSummary, MacroSummary)> {
        match &self.rows {
            EvalRows::Regression(rows) => {
                let pick = |f: &dyn Fn(&RegressionMetrics) -> f64| -> Vec<Option<f64>> {
                    rows.iter().map(|r| r.metrics.as_ref().map(f)).collect()
                };
                Ok((
                    macro_average(&pick(&|m| m.rmse))?,
                    macro_average(&pick(&|m| m.r2))?,
                    macro_average(&pick(&|m| m.pcc))?,
                    macro_average(&pick(&|m| m.fitness))?,
                ))
            }
            EvalRows::Classification(_) => {
                Err(Error::Contract("regression metric on a classification report".into()))
            }
        }
    }

    /// Value used for model selection: macro AUPRC for classification
    /// (higher is better), negated macro RMSE for regression.
    pub fn selection_value(&self) -> Option<f64> {
        match &self.rows {
            EvalRows::Classification(_) => self.macro_auprc().ok().map(|m| m.mean),
            EvalRows::Regression(_) => self.macro_regression().ok().map(|(rmse, _, _, _)| -rmse.mean),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.rows {
            EvalRows::Classification(rows) => {
                out.push_str("relation,n_pos,n_neg,auroc,auprc,ap50,accuracy\n");
                for r in rows {
                    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.relation,
                        r.n_pos,
                        r.n_neg,
                        fmt(r.auroc),
                        fmt(r.auprc),
                        fmt(r.ap50),
                        fmt(r.accuracy)
                    );
                }
            }
            EvalRows::Regression(rows) => {
                out.push_str("relation,n,rmse,r2,pcc,fitness\n");
                for r in rows {
                    match &r.metrics {
                        Some(m) => {
                            let _ = writeln!(
                                out,
                                "{},{},{:.6},{:.6},{:.6},{:.6}",
                                r.relation, r.n, m.rmse, m.r2, m.pcc, m.fitness
                            );
                        }
                        None => {
                            let _ = writeln!(out, "{},{},,,,", r.relation, r.n);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.rows {
            EvalRows::Classification(rows) => {
                let macro_or_null = |m: Result<MacroSummary>| match m {
                    Ok(s) => serde_json::json!({
                        "mean": s.mean, "included": s.included, "excluded": s.excluded
                    }),
                    Err(_) => serde_json::Value::Null,
                };
                serde_json::json!({
                    "split": self.split.to_string(),
                    "kind": "classification",
                    "relations": rows.iter().map(|r| serde_json::json!({
                        "relation": r.relation,
                        "n_pos": r.n_pos,
                        "n_neg": r.n_neg,
                        "auroc": r.auroc,
                        "auprc": r.auprc,
                        "ap50": r.ap50,
                        "accuracy": r.accuracy,
                    })).collect::<Vec<_>>(),
                    "macro": {
                        "auroc": macro_or_null(self.macro_auroc()),
                        "auprc": macro_or_null(self.macro_auprc()),
                        "ap50": macro_or_null(self.macro_ap50()),
                        "accuracy": macro_or_null(self.macro_accuracy()),
                    },
                })
            }
            EvalRows::Regression(rows) => {
                let macros = self.macro_regression().ok();
                serde_json::json!({
                    "split": self.split.to_string(),
                    "kind": "regression",
                    "relations": rows.iter().map(|r| serde_json::json!({
                        "relation": r.relation,
                        "n": r.n,
                        "rmse": r.metrics.as_ref().map(|m| m.rmse),
                        "r2": r.metrics.as_ref().map(|m| m.r2),
                        "pcc": r.metrics.as_ref().map(|m| m.pcc),
                        "fitness": r.metrics.as_ref().map(|m| m.fitness),
                    })).collect::<Vec<_>>(),
                    "macro": macros.map(|(rmse, r2, pcc, fit)| serde_json::json!({
                        "rmse": rmse.mean, "r2": r2.mean, "pcc": pcc.mean, "fitness": fit.mean,
                    })),
                })
            }
        }
    }
}

/// Score one split of every supervised relation with frozen negatives.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<S: Scalar>(
    graph: &MultimodalGraph,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    arch: &Architecture,
    params: &ParamStore<S>,
    adjacency: &[Option<RelationAdj<S>>],
    fingerprints: Option<&DenseMatrix<S>>,
    which: Partition,
) -> Result<EvalReport> {
    split.validate(graph)?;
    let fan = SeedFan::new(cfg.seed);
    let mut tape = Tape::new();
    let mut binder = ParamBinder::new(params);
    let input = ForwardInput { graph, adjacency, noise: None, fingerprints };
    let latents = build_latents(&mut tape, &mut binder, arch, &input)?;

    let mut class_rows = Vec::new();
    let mut reg_rows = Vec::new();
    for (rel_idx, spec) in graph.relations().iter().enumerate() {
        if arch.decode[rel_idx].is_none() {
            continue;
        }
        let indices = split.per_relation[rel_idx].list(which);
        let positives: Vec<(usize, usize)> = indices
            .iter()
            .map(|&e| {
                let edge = graph.edges(rel_idx)[e];
                (edge.src, edge.dst)
            })
            .collect();

        if cfg.task.is_regression() {
            let truths: Vec<f64> = indices
                .iter()
                .map(|&e| graph.edges(rel_idx)[e].weight.unwrap_or(0.0))
                .collect();
            if positives.is_empty() {
                reg_rows.push(RegRow { relation: spec.name.clone(), n: 0, metrics: None });
                continue;
            }
            let scores = score_pairs(&mut tape, &mut binder, arch, graph, &latents, rel_idx, &positives)?;
            let preds: Vec<f64> =
                tape.value(scores).data().iter().map(|v| v.as_f64()).collect();
            let metrics = match regression_suite(&preds, &truths) {
                Ok(m) => Some(m),
                Err(Error::UndefinedMetric(msg)) => {
                    warn!("relation '{}' on {which}: {msg}", spec.name);
                    None
                }
                Err(e) => return Err(e),
            };
            reg_rows.push(RegRow { relation: spec.name.clone(), n: positives.len(), metrics });
            continue;
        }

        if positives.is_empty() {
            class_rows.push(ClassRow {
                relation: spec.name.clone(),
                n_pos: 0,
                n_neg: 0,
                auroc: None,
                auprc: None,
                ap50: None,
                accuracy: None,
            });
            continue;
        }
        let all_positives = PairSet::full(graph, rel_idx);
        let (_, dt) = graph.relation_endpoint_types(rel_idx);
        let mut rng = fan.stream(&format!("eval-neg:{which}:{}", spec.name));
        let negatives = sample_negatives(
            &spec.name,
            &positives,
            &all_positives,
            graph.node_type(dt).count(),
            1,
            cfg.corruption,
            &mut rng,
            DEFAULT_MAX_RETRIES,
        );

        let pos_scores =
            score_pairs(&mut tape, &mut binder, arch, graph, &latents, rel_idx, &positives)?;
        let pos_probs =
            link_probability(&tape.value(pos_scores).data().iter().map(|v| v.as_f64()).collect::<Vec<_>>());
        let mut preds: Vec<(f64, bool)> = pos_probs.into_iter().map(|p| (p, true)).collect();
        if !negatives.is_empty() {
            let neg_scores =
                score_pairs(&mut tape, &mut binder, arch, graph, &latents, rel_idx, &negatives)?;
            let neg_probs = link_probability(
                &tape.value(neg_scores).data().iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            );
            preds.extend(neg_probs.into_iter().map(|p| (p, false)));
        }

        let metric_or_none = |r: Result<f64>, name: &str| -> Result<Option<f64>> {
            match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::UndefinedMetric(msg)) => {
                    warn!("relation '{}' on {which}: {name} undefined ({msg})", spec.name);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        };
        class_rows.push(ClassRow {
            relation: spec.name.clone(),
            n_pos: positives.len(),
            n_neg: negatives.len(),
            auroc: metric_or_none(auroc(&preds), "AUROC")?,
            auprc: metric_or_none(auprc(&preds), "AUPRC")?,
            ap50: metric_or_none(ap_at_k(&preds, AP_K), "AP@50")?,
            accuracy: Some(accuracy(&preds, 0.5)),
        });
    }

    let rows = if cfg.task.is_regression() {
        EvalRows::Regression(reg_rows)
    } else {
        EvalRows::Classification(class_rows)
    };
    Ok(EvalReport { split: which, rows })
}
