use super::Tensor;
use crate::error::{Error, Result};

/// Adam moments and hyperparameters. Defaults for the betas and epsilon are
/// the usual `0.9`, `0.999`, `1e-8`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every trainable tensor; clears their
/// gradients afterwards.
pub fn adam_step(params: &mut [Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::Invariant(format!(
            "optimizer tracks {} tensors, model has {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some(i) = params.iter().position(|p| p.requires_grad() && p.grad().is_none()) {
        return Err(Error::Invariant(format!("parameter {i} has no gradient")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        if !p.requires_grad() {
            continue;
        }
        let g = p.grad().map(<[f64]>::to_vec).unwrap_or_default();
        let data = p.data_mut();
        for k in 0..data.len() {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            data[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        p.clear_grad();
    }
    Ok(())
}
