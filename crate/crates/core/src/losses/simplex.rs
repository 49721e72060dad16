//! Single-pixel descent on the probability simplex: shows where each loss
//! drives a free belief when nothing but the loss acts on it.

use super::{AnnealSchedule, EvidentialLoss, LossWeights};
use crate::dirichlet::{belief_from_logits, PixelBelief};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Runs `steps` plain gradient-descent updates on the logits of one pixel
/// with target class `target`, KL weight at its plateau throughout.
pub fn descend_single_pixel(
    weights: LossWeights,
    initial_logits: &[f64],
    target: usize,
    steps: usize,
    learning_rate: f64,
) -> Result<PixelBelief> {
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::Config(format!("invalid learning rate {learning_rate}")));
    }
    let c = initial_logits.len();
    let always_on = AnnealSchedule::new(0, 1, weights.w_kl)?;
    let loss = EvidentialLoss::new(weights, always_on, 1.0)?;
    let labels = [u8::try_from(target).map_err(|_| Error::ClassOutOfRange { class: target, num_classes: c })?];
    let mut x = Tensor::new(vec![1, c, 1, 1], initial_logits.to_vec())?;
    for _ in 0..steps {
        let (_, g) = loss.evaluate_with_gradient(&x, &labels, 1)?;
        for (v, d) in x.data_mut().iter_mut().zip(g.data()) {
            *v -= learning_rate * d;
        }
    }
    belief_from_logits(x.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_seeks_the_vertex_while_wasserstein_kl_stays_uncertain() {
        let start = [0.5, 0.4, 0.3];
        let mse = descend_single_pixel(LossWeights::mse_only(), &start, 0, 6000, 50.0).unwrap();
        let wkl = descend_single_pixel(LossWeights::new(1.0, 0.0, 0.15, 0.0).unwrap(), &start, 0, 6000, 50.0).unwrap();
        assert!(mse.uncertainty < 0.05, "mse U = {}", mse.uncertainty);
        assert!(wkl.uncertainty > mse.uncertainty, "{} vs {}", wkl.uncertainty, mse.uncertainty);
        assert!(mse.probabilities[0] > 0.9 && wkl.probabilities[0] > 0.5);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(descend_single_pixel(LossWeights::mse_only(), &[0.0; 3], 0, 1, 0.0).is_err());
        assert!(descend_single_pixel(LossWeights::mse_only(), &[0.0; 3], 3, 1, 1.0).is_err());
    }
}
