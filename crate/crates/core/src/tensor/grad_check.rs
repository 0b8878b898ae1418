//! Central-difference gradient verification against the tape backward.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::num::Scalar;
use crate::tensor::params::ParamStore;
use crate::tensor::tape::{NodeId, Tape};

/// Gradient magnitudes below this floor are compared absolutely; the
/// finite-difference noise floor makes relative error meaningless there.
const REL_ERR_FLOOR: f64 = 1e-3;

/// A loss function rebuilt from a parameter store. Returns the tape,
/// the scalar loss node and the tape binding of every parameter that
/// participates in the loss.
pub trait LossBuilder<S: Scalar> {
    fn build(&self, params: &ParamStore<S>)
        -> Result<(Tape<S>, NodeId, BTreeMap<String, NodeId>)>;
}

impl<S: Scalar, F> LossBuilder<S> for F
where
    F: Fn(&ParamStore<S>) -> Result<(Tape<S>, NodeId, BTreeMap<String, NodeId>)>,
{
    fn build(
        &self,
        params: &ParamStore<S>,
    ) -> Result<(Tape<S>, NodeId, BTreeMap<String, NodeId>)> {
        self(params)
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamCheck>,
    pub tol: f64,
    pub eps: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.per_param.iter().all(|p| p.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.per_param.iter().filter(|p| !p.pass)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.per_param
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compare backward-pass gradients against central finite differences
/// for every entry of every parameter bound by the builder.
pub fn grad_check<S: Scalar>(
    params: &ParamStore<S>,
    builder: &impl LossBuilder<S>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    assert!(eps > 0.0, "grad_check requires a positive step");
    let (tape, loss, bindings) = builder.build(params)?;
    let grads = tape.backward(loss)?;

    let mut work = params.clone();
    let mut per_param = Vec::new();
    for (name, node) in &bindings {
        let analytic = grads.get(*node).cloned();
        let shape = params.get(name)?.shape();
        let mut max_err = 0.0f64;
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let original = work.get(name)?.get(r, c);
                let h = S::from_f64(eps);

                work.get_mut(name)?.set(r, c, original + h);
                let (tp, lp, _) = builder.build(&work)?;
                let f_plus = tp.value(lp).scalar_value()?.as_f64();

                work.get_mut(name)?.set(r, c, original - h);
                let (tm, lm, _) = builder.build(&work)?;
                let f_minus = tm.value(lm).scalar_value()?.as_f64();

                work.get_mut(name)?.set(r, c, original);

                let numeric = (f_plus - f_minus) / (2.0 * eps);
                let a = analytic.as_ref().map_or(0.0, |g| g.get(r, c).as_f64());
                max_err = max_err.max(rel_err(a, numeric));
            }
        }
        per_param.push(ParamCheck { name: name.clone(), max_rel_err: max_err, pass: max_err < tol });
    }
    Ok(GradCheckReport { per_param, tol, eps })
}
