//! Adam optimizer with bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::matrix::DenseMatrix;
use crate::tensor::params::ParamStore;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<S> {
    cfg: AdamConfig,
    first: BTreeMap<String, DenseMatrix<S>>,
    second: BTreeMap<String, DenseMatrix<S>>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, first: BTreeMap::new(), second: BTreeMap::new(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over every parameter that received a gradient.
    /// Parameters absent from `grads` are left untouched this step.
    pub fn step(
        &mut self,
        params: &mut ParamStore<S>,
        grads: &BTreeMap<String, DenseMatrix<S>>,
    ) -> Result<()> {
        for (name, g) in grads {
            if !g.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient for parameter '{name}'"
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f64(self.cfg.beta1);
        let b2 = S::from_f64(self.cfg.beta2);
        let lr = S::from_f64(self.cfg.lr);
        let eps = S::from_f64(self.cfg.eps);
        let one = S::one();
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);

        for (name, g) in grads {
            let p = params.get_mut(name)?;
            if p.shape() != g.shape() {
                return Err(Error::Contract(format!(
                    "gradient shape {:?} does not match parameter '{}' {:?}",
                    g.shape(),
                    name,
                    p.shape()
                )));
            }
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| DenseMatrix::zeros(g.rows(), g.cols()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| DenseMatrix::zeros(g.rows(), g.cols()));

            let pd = p.data_mut();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = b1 * md[i] + (one - b1) * gi;
                vd[i] = b2 * vd[i] + (one - b2) * gi * gi;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] = pd[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads_of(name: &str, g: DenseMatrix<f64>) -> BTreeMap<String, DenseMatrix<f64>> {
        let mut map = BTreeMap::new();
        map.insert(name.to_string(), g);
        map
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // With m_hat = g and v_hat = g^2 after one step, the update is
        // -lr * g / (|g| + eps), i.e. -lr * sign(g) up to eps rounding.
        let lr = 0.05;
        let mut params = ParamStore::new();
        params
            .insert("w", DenseMatrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap())
            .unwrap();
        let g = DenseMatrix::from_vec(1, 3, vec![0.3, -0.7, 2.0]).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(lr));
        adam.step(&mut params, &grads_of("w", g.clone())).unwrap();

        let w = params.get("w").unwrap();
        let before = [1.0, -2.0, 0.5];
        for i in 0..3 {
            let gi: f64 = g.get(0, i);
            let expected = before[i] - lr * gi.signum();
            let slack = (lr * 1e-8 / (gi.abs() + 1e-8)).abs() + 1e-12;
            assert!(
                (w.get(0, i) - expected).abs() <= slack,
                "entry {i}: {} vs {expected}",
                w.get(0, i)
            );
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = ParamStore::new();
        params.insert("w", DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap()).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1));
        adam.step(&mut params, &grads_of("w", DenseMatrix::zeros(1, 2))).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[1.0, 2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_lr_freezes_parameters() {
        let mut params = ParamStore::new();
        params.insert("w", DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap()).unwrap();
        let g = DenseMatrix::from_vec(1, 2, vec![0.5, -0.5]).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(0.0));
        adam.step(&mut params, &grads_of("w", g.clone())).unwrap();
        adam.step(&mut params, &grads_of("w", g)).unwrap();
        assert_eq!(params.get("w").unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn non_finite_gradient_aborts_with_parameter_name() {
        let mut params = ParamStore::new();
        params.insert("w", DenseMatrix::zeros(1, 1)).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1));
        let err = adam.step(&mut params, &grads_of("w", g)).unwrap_err();
        assert!(err.to_string().contains("'w'"));
        // The aborted step must not advance the counter or the params.
        assert_eq!(adam.step_count(), 0);
        assert_eq!(params.get("w").unwrap().data(), &[0.0]);
    }

    #[test]
    fn update_order_does_not_affect_trajectories() {
        // Adam is per-parameter; interleaving two parameters in either
        // registration order must give identical trajectories.
        let build = |order: &[(&str, f64)]| {
            let mut params = ParamStore::new();
            for (name, v) in order {
                params.insert(*name, DenseMatrix::from_vec(1, 1, vec![*v]).unwrap()).unwrap();
            }
            let mut adam = AdamState::new(AdamConfig::with_lr(0.01));
            for step in 0..5 {
                let mut grads = BTreeMap::new();
                for (name, _) in order {
                    let g = 0.1 * (step as f64 + 1.0) * if *name == "a" { 1.0 } else { -2.0 };
                    grads.insert(name.to_string(), DenseMatrix::from_vec(1, 1, vec![g]).unwrap());
                }
                adam.step(&mut params, &grads).unwrap();
            }
            (
                params.get("a").unwrap().get(0, 0),
                params.get("b").unwrap().get(0, 0),
            )
        };
        assert_eq!(build(&[("a", 1.0), ("b", 2.0)]), build(&[("b", 2.0), ("a", 1.0)]));
    }
}
