//! ADAM with bias correction and stepwise exponential learning-rate decay.

use crate::model::{CnnModel, ModelGrads};
use crate::train::TrainConfig;

/// First/second moment estimates per parameter tensor plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// Completed optimizer steps.
    pub step: usize,
}

impl AdamState {
    pub fn new_like(model: &CnnModel) -> Self {
        let m: Vec<Vec<f64>> = model.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        AdamState { v: m.clone(), m, step: 0 }
    }
}

/// Effective learning rate at 1-based step `t`: `lr * decay^floor(t / every)`.
pub fn lr_at_step(config: &TrainConfig, t: usize) -> f64 {
    config.lr * config.decay.powi((t / config.decay_every) as i32)
}

/// One ADAM update over every parameter tensor.
pub fn adam_step(
    model: &mut CnnModel,
    grads: &ModelGrads,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step;
    let lr = lr_at_step(config, t);
    let b1 = config.adam_beta1;
    let b2 = config.adam_beta2;
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);
    for ((param, grad), (m, v)) in model
        .param_slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
    }
}
