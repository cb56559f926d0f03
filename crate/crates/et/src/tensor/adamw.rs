//! AdamW: Adam with decoupled weight decay.

use super::{Tensor, TensorError};

/// Optimizer state; `m`/`v` are allocated to match the parameter list on the
/// first step and `step` increments by exactly one per update.
#[derive(Clone, Debug)]
pub struct AdamWState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWState {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamWState {
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One optimizer update over a flat parameter list.
///
/// The weight decay is decoupled: `p -= lr·wd·p` is applied from the
/// pre-step value, separately from the bias-corrected adaptive term. A
/// non-finite gradient anywhere rejects the whole update and reports the
/// offending parameter; nothing is mutated in that case.
pub fn adamw_step(
    params: &mut [(&str, &mut Tensor)],
    grads: &[Vec<f64>],
    state: &mut AdamWState,
) -> Result<(), TensorError> {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    for (i, (name, p)) in params.iter().enumerate() {
        assert_eq!(p.numel(), grads[i].len(), "gradient shape for {name}");
        if grads[i].iter().any(|g| !g.is_finite()) {
            return Err(TensorError::NonFiniteGrad {
                index: i,
                name: name.to_string(),
            });
        }
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        state.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    for (i, (_, p)) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, &g) in grads[i].iter().enumerate() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let old = p.data[j];
            p.data[j] = old
                - state.lr * (m_hat / (v_hat.sqrt() + state.eps))
                - state.lr * state.weight_decay * old;
        }
    }
    Ok(())
}
