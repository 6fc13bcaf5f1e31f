use super::model::{Gradients, HeadParameters};
use super::TrainConfig;
use crate::scalar::Scalar;

/// Adam first/second moment estimates and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m_weights: Vec<T>,
    pub m_bias: [T; 4],
    pub v_weights: Vec<T>,
    pub v_bias: [T; 4],
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m_weights: vec![T::zero(); dim * 4],
            m_bias: [T::zero(); 4],
            v_weights: vec![T::zero(); dim * 4],
            v_bias: [T::zero(); 4],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `W` and `b` in place.
pub fn adam_step<T: Scalar>(
    params: &mut HeadParameters<T>,
    state: &mut AdamState<T>,
    grads: &Gradients<T>,
    config: &TrainConfig,
) {
    state.t += 1;
    let b1 = T::of(config.adam_beta1);
    let b2 = T::of(config.adam_beta2);
    let eps = T::of(config.adam_epsilon);
    let lr = T::of(config.learning_rate);
    let t = state.t as i32;
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);

    let update = |theta: &mut T, m: &mut T, v: &mut T, g: T| {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
    };

    for (((theta, m), v), &g) in params
        .weights_mut()
        .iter_mut()
        .zip(state.m_weights.iter_mut())
        .zip(state.v_weights.iter_mut())
        .zip(&grads.weights)
    {
        update(theta, m, v, g);
    }
    let bias = params.bias_mut();
    for c in 0..4 {
        update(&mut bias[c], &mut state.m_bias[c], &mut state.v_bias[c], grads.bias[c]);
    }
}
