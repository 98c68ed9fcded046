use std::collections::BTreeMap;

use super::{Gradients, ParamId, Parameters, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 5e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    /// `lr = 0` is accepted and turns every step into a no-op.
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if !beta_ok(self.beta1) || !beta_ok(self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("Adam epsilon must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Tensor,
    v: Tensor,
    steps: u64,
}

/// Bias-corrected Adam. Moments are created lazily the first time a
/// parameter receives a gradient, and each parameter's bias correction
/// uses the number of updates that parameter has actually received.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    t: u64,
    moments: BTreeMap<ParamId, Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, t: 0, moments: BTreeMap::new() })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of `step` calls so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Apply one update to every parameter present in `grads`.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &Gradients) -> Result<()> {
        // Validate everything before mutating anything.
        for (id, g) in grads.iter() {
            let p = params.param(id).ok_or_else(|| Error::UnknownParam(id.to_string()))?;
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    expected: p.shape_string(),
                    found: g.shape_string(),
                });
            }
            if let Some(m) = self.moments.get(&id) {
                if m.m.shape() != g.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "adam_step",
                        expected: m.m.shape_string(),
                        found: g.shape_string(),
                    });
                }
            }
        }
        let AdamConfig { lr, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        for (id, g) in grads.iter() {
            let state = self.moments.entry(id).or_insert_with(|| Moments {
                m: Tensor::zeros(g.rows(), g.cols()),
                v: Tensor::zeros(g.rows(), g.cols()),
                steps: 0,
            });
            state.steps += 1;
            let bc1 = 1.0 - beta1.powi(state.steps as i32);
            let bc2 = 1.0 - beta2.powi(state.steps as i32);
            let p = params.param_mut(id).expect("checked above");
            let (m, v) = (state.m.as_mut_slice(), state.v.as_mut_slice());
            for (((pi, mi), vi), gi) in p.as_mut_slice().iter_mut().zip(m).zip(v).zip(g.as_slice()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> BTreeMap<ParamId, Tensor> {
        [(ParamId::new(0, 0), Tensor::scalar(value))].into_iter().collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = single(0.75);
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1)).unwrap();
        let grads: Gradients = [(ParamId::new(0, 0), Tensor::scalar(0.0))].into_iter().collect();
        for _ in 0..3 {
            adam.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params[&ParamId::new(0, 0)].as_slice(), [0.75]);
        assert_eq!(adam.t(), 3);
    }

    #[test]
    fn first_step_by_hand() {
        let mut params = single(1.0);
        let mut adam = AdamState::new(AdamConfig::with_lr(0.1)).unwrap();
        let grads: Gradients = [(ParamId::new(0, 0), Tensor::scalar(1.0))].into_iter().collect();
        assert_eq!(adam.t(), 0);
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(adam.t(), 1);
        // m_hat = 1, v_hat = 1, update = 0.1 / (1 + 1e-8)
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params[&ParamId::new(0, 0)].as_slice()[0] - expected).abs() < 1e-15);
        assert!((params[&ParamId::new(0, 0)].as_slice()[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn identical_params_move_identically() {
        let (a, b) = (ParamId::new(0, 0), ParamId::new(1, 0));
        let mut params: BTreeMap<_, _> =
            [(a, Tensor::row(vec![0.3, -0.2])), (b, Tensor::row(vec![0.3, -0.2]))].into_iter().collect();
        let mut adam = AdamState::new(AdamConfig::with_lr(0.01)).unwrap();
        for k in 0..5 {
            let g = Tensor::row(vec![0.1 * k as f64, -0.4]);
            let grads: Gradients = [(a, g.clone()), (b, g)].into_iter().collect();
            adam.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params[&a], params[&b]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut params = single(1.0);
        let mut adam = AdamState::new(AdamConfig::default()).unwrap();
        let wrong_shape: Gradients = [(ParamId::new(0, 0), Tensor::row(vec![1.0, 2.0]))].into_iter().collect();
        assert!(matches!(adam.step(&mut params, &wrong_shape), Err(Error::ShapeMismatch { .. })));
        let unknown: Gradients = [(ParamId::new(9, 0), Tensor::scalar(1.0))].into_iter().collect();
        assert!(matches!(adam.step(&mut params, &unknown), Err(Error::UnknownParam(_))));
        assert_eq!(adam.t(), 0);

        assert!(AdamState::new(AdamConfig { beta1: 1.0, ..Default::default() }).is_err());
        assert!(AdamState::new(AdamConfig { lr: -1.0, ..Default::default() }).is_err());
        assert!(AdamState::new(AdamConfig { epsilon: 0.0, ..Default::default() }).is_err());
    }
}
