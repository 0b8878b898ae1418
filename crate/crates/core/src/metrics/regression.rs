//! Regression metrics: RMSE, coefficient of determination, Pearson
//! correlation, and the composite fitness = R^2 + PCC - RMSE.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub r2: f64,
    pub pcc: f64,
    pub fitness: f64,
}

pub fn regression_suite(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Contract(
            "regression_suite needs equal, non-empty inputs".into(),
        ));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite regression value".into()));
    }
    let n = pred.len() as f64;
    let mean_t = truth.iter().sum::<f64>() / n;
    let mean_p = pred.iter().sum::<f64>() / n;

    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean_t) * (t - mean_t)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric(
            "zero-variance truth: R^2 and PCC are undefined".into(),
        ));
    }
    let var_p: f64 = pred.iter().map(|p| (p - mean_p) * (p - mean_p)).sum();
    if var_p == 0.0 {
        return Err(Error::UndefinedMetric(
            "zero-variance predictions: PCC is undefined".into(),
        ));
    }

    let rmse = (ss_res / n).sqrt();
    let r2 = 1.0 - ss_res / ss_tot;
    let cov: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - mean_p) * (t - mean_t))
        .sum();
    let pcc = cov / (var_p.sqrt() * ss_tot.sqrt());
    Ok(RegressionMetrics { rmse, r2, pcc, fitness: r2 + pcc - rmse })
}
