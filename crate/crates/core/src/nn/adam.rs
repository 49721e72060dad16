use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_params(params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One ADAM step at (1-based) step count `t`.
///
/// Weight decay is decoupled: `p <- p - lr * weight_decay * p` is applied
/// before the bias-corrected adaptive update.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("ADAM step count starts at 1".into()));
    }
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![params.len()],
            found: vec![grads.len(), state.m.len()],
        });
    }
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        if g.len() != p.len() {
            return Err(Error::ShapeMismatch {
                expected: p.shape().to_vec(),
                found: vec![g.len()],
            });
        }
        for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *x -= lr * weight_decay * *x;
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *x -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(values: &[f64]) -> Vec<Tensor> {
        vec![Tensor::new(vec![values.len()], values.to_vec()).unwrap()]
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = one(&[0.5, -1.5, 2.0]);
        let mut s = AdamState::for_params(&p);
        for t in 1..=10 {
            adam_step(&mut p, &[vec![0.0; 3]], &mut s, 1e-3, 0.0, t).unwrap();
        }
        assert_eq!(p[0].data(), &[0.5, -1.5, 2.0]);
    }

    #[test]
    fn decay_only_shrinks_by_factor() {
        let mut p = one(&[2.0, -4.0]);
        let mut s = AdamState::for_params(&p);
        adam_step(&mut p, &[vec![0.0; 2]], &mut s, 3e-4, 1e-4, 1).unwrap();
        let f = 1.0 - 3e-8;
        assert_eq!(p[0].data(), &[2.0 * f, -4.0 * f]);
    }

    #[test]
    fn constant_gradient_moves_by_lr_per_step() {
        // reference recurrence, written out independently
        let (lr, g) = (1e-2, [0.3, -2.0]);
        let mut p = one(&[0.0, 0.0]);
        let mut s = AdamState::for_params(&p);
        let mut prev = [0.0, 0.0];
        let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        let mut sim = [0.0f64; 2];
        for t in 1..=1000u64 {
            adam_step(&mut p, &[g.to_vec()], &mut s, lr, 0.0, t).unwrap();
            for k in 0..2 {
                m[k] = 0.9 * m[k] + 0.1 * g[k];
                v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
                let mh = m[k] / (1.0 - 0.9f64.powi(t as i32));
                let vh = v[k] / (1.0 - 0.999f64.powi(t as i32));
                sim[k] -= lr * mh / (vh.sqrt() + 1e-8);
            }
            let step: Vec<f64> = (0..2).map(|k| p[0].data()[k] - prev[k]).collect();
            assert!((step[0] + lr).abs() < 1e-9 && (step[1] - lr).abs() < 1e-9);
            prev = [p[0].data()[0], p[0].data()[1]];
        }
        for k in 0..2 {
            assert!((p[0].data()[k] - sim[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_step_zero_and_mismatch() {
        let mut p = one(&[1.0]);
        let mut s = AdamState::for_params(&p);
        assert!(adam_step(&mut p, &[vec![0.0]], &mut s, 1e-3, 0.0, 0).is_err());
        assert!(adam_step(&mut p, &[vec![0.0, 1.0]], &mut s, 1e-3, 0.0, 1).is_err());
    }
}
