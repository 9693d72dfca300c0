use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, Network, NnError};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = net.parameters().iter().map(|p| p.len()).collect();
        Self {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState) -> Result<(), NnError> {
    adam_step_with_rate(net, grads, state, state.config.learning_rate)
}

pub(crate) fn adam_step_with_rate(
    net: &mut Network,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NnError> {
    let mut params = net.parameters_mut();
    let shapes_match = params.len() == grads.0.len()
        && params.len() == state.first.len()
        && params
            .iter()
            .zip(&grads.0)
            .zip(&state.first)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(NnError::ShapeMismatch);
    }

    state.step += 1;
    let AdamConfig {
        beta1, beta2, epsilon, ..
    } = state.config;
    let t = state.step as f64;
    let correction1 = 1.0 - math::pow(beta1, t);
    let correction2 = 1.0 - math::pow(beta2, t);

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads.0)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (math::sqrt(v_hat) + epsilon);
        }
    }
    Ok(())
}
