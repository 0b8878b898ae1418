//! Training reports: per-epoch CSV and a JSON summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::train::eval::EvalReport;

#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_link: f64,
    /// Weighted KL contribution per node type.
    pub kl: BTreeMap<String, f64>,
    pub val_metric: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub seed: u64,
    pub config_echo: String,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv(&self) -> String {
        let mut kl_types: Vec<&str> = self
            .rows
            .iter()
            .flat_map(|r| r.kl.keys().map(String::as_str))
            .collect();
        kl_types.sort_unstable();
        kl_types.dedup();

        let mut out = String::from("epoch,loss_total,loss_link");
        for t in &kl_types {
            let _ = write!(out, ",kl_{t}");
        }
        out.push_str(",val_metric,seconds\n");
        for row in &self.rows {
            let _ = write!(out, "{},{:.6},{:.6}", row.epoch, row.loss_total, row.loss_link);
            for t in &kl_types {
                match row.kl.get(*t) {
                    Some(v) => {
                        let _ = write!(out, ",{v:.6}");
                    }
                    None => out.push(','),
                }
            }
            match row.val_metric {
                Some(v) => {
                    let _ = writeln!(out, ",{v:.6},{:.3}", row.seconds);
                }
                None => {
                    let _ = writeln!(out, ",,{:.3}", row.seconds);
                }
            }
        }
        out
    }

    pub fn summary_json(&self, final_eval: Option<&EvalReport>) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "epochs_run": self.epochs_run(),
            "best_epoch": self.best_epoch,
            "best_metric": self.best_metric,
            "final_loss": self.rows.last().map(|r| r.loss_total),
            "validation": final_eval.map(EvalReport::to_json),
            "config": self.config_echo,
        })
    }
}
