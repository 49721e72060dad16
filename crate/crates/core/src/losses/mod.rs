//! Composite evidential loss.
//!
//! Four terms are combined per batch:
//!
//! - Wasserstein term `1 - p_y` (transport under the 0/1 ground metric),
//!   averaged over pixels
//! - image-level soft Dice per class, averaged over images then classes
//! - `KL[Dir(alpha) || Dir(a0 * 1)]`, averaged over pixels and weighted by
//!   an annealed schedule
//! - expected squared error with the Dirichlet variance term, summed over
//!   classes and averaged over pixels
//!
//! Every term has an analytic gradient with respect to the raw logits; the
//! ReLU evidence map contributes a zero derivative wherever `logit <= 0`.

pub mod gradcheck;
mod simplex;

pub use simplex::descend_single_pixel;

use serde::{Deserialize, Serialize};

use crate::dirichlet::{
    digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked, DirichletParams, PixelBelief,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The λ quadruple weighting the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_wasserstein: f64,
    pub w_dice: f64,
    /// Plateau value of the annealed KL weight.
    pub w_kl: f64,
    pub w_mse: f64,
}

impl LossWeights {
    pub fn new(w_wasserstein: f64, w_dice: f64, w_kl: f64, w_mse: f64) -> Result<Self> {
        let w = Self {
            w_wasserstein,
            w_dice,
            w_kl,
            w_mse,
        };
        w.validate()?;
        Ok(w)
    }

    /// MSE-only configuration.
    pub fn mse_only() -> Self {
        Self {
            w_wasserstein: 0.0,
            w_dice: 0.0,
            w_kl: 0.0,
            w_mse: 1.0,
        }
    }

    /// The best-performing combination reported for the composite loss.
    pub fn composite_default() -> Self {
        Self {
            w_wasserstein: 1.0,
            w_dice: 0.75,
            w_kl: 0.15,
            w_mse: 0.45,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_wasserstein, self.w_dice, self.w_kl, self.w_mse];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative, got {all:?}"
            )));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// Linear ramp of the KL weight from 0 at `ramp_start` to `plateau` at `ramp_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub ramp_start: u64,
    pub ramp_end: u64,
    pub plateau: f64,
}

impl AnnealSchedule {
    pub fn new(ramp_start: u64, ramp_end: u64, plateau: f64) -> Result<Self> {
        let s = Self {
            ramp_start,
            ramp_end,
            plateau,
        };
        s.validate()?;
        Ok(s)
    }

    /// Ramp used at full training scale: 40k to 48k of 80k iterations.
    pub fn full_scale(plateau: f64) -> Self {
        Self {
            ramp_start: 40_000,
            ramp_end: 48_000,
            plateau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ramp_start >= self.ramp_end {
            return Err(Error::Config(format!(
                "ramp_start ({}) must be below ramp_end ({})",
                self.ramp_start, self.ramp_end
            )));
        }
        if !self.plateau.is_finite() || self.plateau < 0.0 {
            return Err(Error::Config(format!(
                "KL plateau must be finite and non-negative, got {}",
                self.plateau
            )));
        }
        Ok(())
    }
}

/// Per-term values of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub wasserstein: f64,
    pub dice: f64,
    pub kl: f64,
    pub mse: f64,
    pub kl_weight_used: f64,
}

pub fn kl_weight(iteration: u64, schedule: &AnnealSchedule) -> f64 {
    if iteration <= schedule.ramp_start {
        0.0
    } else if iteration >= schedule.ramp_end {
        schedule.plateau
    } else {
        let done = (iteration - schedule.ramp_start) as f64;
        let span = (schedule.ramp_end - schedule.ramp_start) as f64;
        schedule.plateau * (done / span)
    }
}

/// Expected squared error plus Dirichlet variance, summed over classes.
pub fn mse_loss_pixel(belief: &PixelBelief, total: f64, target: &[f64]) -> Result<f64> {
    if target.len() != belief.num_classes() {
        return Err(Error::ShapeMismatch {
            expected: vec![belief.num_classes()],
            found: vec![target.len()],
        });
    }
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    let zeros = target.iter().filter(|&&t| t == 0.0).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::NotOneHot);
    }
    Ok(mse_terms(&belief.probabilities, total, |i| target[i]))
}

fn mse_terms(p: &[f64], total: f64, y: impl Fn(usize) -> f64) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            let d = pi - y(i);
            d * d + pi * (1.0 - pi) / (total + 1.0)
        })
        .sum()
}

/// `1 - p_y` for the true class `target_class` (zero-based).
pub fn wasserstein_loss_pixel(belief: &PixelBelief, target_class: usize) -> Result<f64> {
    let p = belief
        .probabilities
        .get(target_class)
        .ok_or(Error::ClassOutOfRange {
            class: target_class,
            num_classes: belief.num_classes(),
        })?;
    Ok(1.0 - p)
}

/// Soft Dice loss of one class on one image. Both maps must be rank 2 of equal shape.
///
/// An empty prediction against an empty ground truth scores 0.
pub fn dice_loss_class(pred: &Tensor, gt: &Tensor) -> Result<f64> {
    pred.expect_rank(2)?;
    gt.expect_shape(pred.shape())?;
    if let Some(v) = pred.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain {
            name: "dice prediction",
            value: *v,
        });
    }
    if let Some(v) = gt.data().iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Domain {
            name: "dice ground truth",
            value: *v,
        });
    }
    let inter: f64 = pred.data().iter().zip(gt.data()).map(|(p, y)| p * y).sum();
    let denom: f64 = pred.data().iter().sum::<f64>() + gt.data().iter().sum::<f64>();
    Ok(dice_from_sums(inter, denom))
}

fn dice_from_sums(inter: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        0.0
    } else {
        1.0 - 2.0 * inter / denom
    }
}

/// Closed-form `KL[Dir(alpha) || Dir(a0, ..., a0)]`.
pub fn kl_to_prior_pixel(params: &DirichletParams, prior_concentration: f64) -> Result<f64> {
    check_prior(prior_concentration)?;
    Ok(kl_unchecked(params.alpha(), params.total(), prior_concentration))
}

fn check_prior(a0: f64) -> Result<()> {
    if a0.is_finite() && a0 > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "prior concentration",
            value: a0,
        })
    }
}

fn kl_unchecked(alpha: &[f64], total: f64, a0: f64) -> f64 {
    let c = alpha.len() as f64;
    let psi_total = digamma_unchecked(total);
    let mut acc = ln_gamma_unchecked(total) - ln_gamma_unchecked(c * a0) + c * ln_gamma_unchecked(a0);
    for &a in alpha {
        acc += -ln_gamma_unchecked(a) + (a - a0) * (digamma_unchecked(a) - psi_total);
    }
    acc
}

/// Loss configuration: weights, KL schedule and the prior concentration of the KL term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidentialLoss {
    pub weights: LossWeights,
    pub schedule: AnnealSchedule,
    pub prior_concentration: f64,
}

impl EvidentialLoss {
    pub fn new(weights: LossWeights, schedule: AnnealSchedule, prior_concentration: f64) -> Result<Self> {
        weights.validate()?;
        schedule.validate()?;
        check_prior(prior_concentration)?;
        Ok(Self {
            weights,
            schedule,
            prior_concentration,
        })
    }

    /// Loss value of a `[N, C, H, W]` logit batch against `[N, H, W]` labels.
    pub fn evaluate(&self, logits: &Tensor, labels: &[u8], iteration: u64) -> Result<LossBreakdown> {
        let geom = Geometry::check(logits, labels)?;
        Ok(self.forward(&geom, logits.data(), labels, iteration, None))
    }

    /// Gradient of the total loss with respect to the logits, same shape as `logits`.
    pub fn gradient(&self, logits: &Tensor, labels: &[u8], iteration: u64) -> Result<Tensor> {
        self.evaluate_with_gradient(logits, labels, iteration).map(|(_, g)| g)
    }

    pub fn evaluate_with_gradient(
        &self,
        logits: &Tensor,
        labels: &[u8],
        iteration: u64,
    ) -> Result<(LossBreakdown, Tensor)> {
        let geom = Geometry::check(logits, labels)?;
        let mut grad = vec![0.0; logits.len()];
        let breakdown = self.forward(&geom, logits.data(), labels, iteration, Some(&mut grad));
        Ok((breakdown, Tensor::new(logits.shape().to_vec(), grad)?))
    }

    fn forward(
        &self,
        g: &Geometry,
        logits: &[f64],
        labels: &[u8],
        iteration: u64,
        mut grad: Option<&mut [f64]>,
    ) -> LossBreakdown {
        let (n, c, hw) = (g.n, g.c, g.hw);
        let z = (n * hw) as f64;
        let kl_w = kl_weight(iteration, &self.schedule);
        let a0 = self.prior_concentration;
        let w = &self.weights;

        let mut sums = LossBreakdown {
            kl_weight_used: kl_w,
            ..Default::default()
        };

        // per-pixel alpha and probabilities, laid out like the logits
        let mut alpha = vec![0.0; logits.len()];
        let mut totals = vec![0.0; n * hw];
        for img in 0..n {
            for px in 0..hw {
                let mut s = 0.0;
                for k in 0..c {
                    let idx = (img * c + k) * hw + px;
                    let a = crate::dirichlet::relu(logits[idx]) + 1.0;
                    alpha[idx] = a;
                    s += a;
                }
                totals[img * hw + px] = s;
            }
        }

        // image-level Dice sums: (Σ p·y, Σ p + Σ y) per image and class
        let mut dice_inter = vec![0.0; n * c];
        let mut dice_denom = vec![0.0; n * c];
        for img in 0..n {
            for px in 0..hw {
                let s = totals[img * hw + px];
                let y = labels[img * hw + px] as usize;
                for k in 0..c {
                    let p = alpha[(img * c + k) * hw + px] / s;
                    let slot = img * c + k;
                    dice_denom[slot] += p;
                    if k == y {
                        dice_inter[slot] += p;
                        dice_denom[slot] += 1.0;
                    }
                }
            }
        }
        let dice_per_pair = 1.0 / (c * n) as f64;
        sums.dice = dice_inter
            .iter()
            .zip(&dice_denom)
            .map(|(&i, &d)| dice_from_sums(i, d))
            .sum::<f64>()
            * dice_per_pair;

        let mut a_buf = vec![0.0; c];
        let mut p_buf = vec![0.0; c];
        let mut g_alpha = vec![0.0; c];
        let mut g_prob = vec![0.0; c];
        for img in 0..n {
            for px in 0..hw {
                let s = totals[img * hw + px];
                let y = labels[img * hw + px] as usize;
                for k in 0..c {
                    a_buf[k] = alpha[(img * c + k) * hw + px];
                    p_buf[k] = a_buf[k] / s;
                }
                sums.wasserstein += 1.0 - p_buf[y];
                sums.mse += mse_terms(&p_buf, s, |k| if k == y { 1.0 } else { 0.0 });
                sums.kl += kl_unchecked(&a_buf, s, a0);

                let Some(grad) = grad.as_deref_mut() else {
                    continue;
                };
                g_alpha.iter_mut().for_each(|v| *v = 0.0);
                g_prob.iter_mut().for_each(|v| *v = 0.0);

                if w.w_wasserstein > 0.0 {
                    // d(1 - α_y/S)/dα_j = (α_y - δ_jy S) / S²
                    let scale = w.w_wasserstein / z;
                    for k in 0..c {
                        let delta = if k == y { s } else { 0.0 };
                        g_alpha[k] += scale * (a_buf[y] - delta) / (s * s);
                    }
                }
                if w.w_mse > 0.0 {
                    let scale = w.w_mse / z;
                    let s1 = s + 1.0;
                    let mut var_sum = 0.0;
                    for k in 0..c {
                        let yk = if k == y { 1.0 } else { 0.0 };
                        g_prob[k] += scale * (2.0 * (p_buf[k] - yk) + (1.0 - 2.0 * p_buf[k]) / s1);
                        var_sum += p_buf[k] * (1.0 - p_buf[k]);
                    }
                    // explicit dependence on S through the variance denominator
                    let d_s = -scale * var_sum / (s1 * s1);
                    g_alpha.iter_mut().for_each(|v| *v += d_s);
                }
                if w.w_dice > 0.0 {
                    let scale = w.w_dice * dice_per_pair;
                    for k in 0..c {
                        let slot = img * c + k;
                        let (inter, denom) = (dice_inter[slot], dice_denom[slot]);
                        if denom > 0.0 {
                            let yk = if k == y { 1.0 } else { 0.0 };
                            g_prob[k] += scale * (2.0 * inter / (denom * denom) - 2.0 * yk / denom);
                        }
                    }
                }
                if kl_w > 0.0 {
                    // dKL/dα_j = (α_j - a0) ψ'(α_j) - (S - C a0) ψ'(S)
                    let scale = kl_w / z;
                    let tail = (s - c as f64 * a0) * trigamma_unchecked(s);
                    for k in 0..c {
                        g_alpha[k] += scale * ((a_buf[k] - a0) * trigamma_unchecked(a_buf[k]) - tail);
                    }
                }

                // chain dp_k/dα_j = (δ_kj - p_k) / S
                let gp_dot: f64 = g_prob.iter().zip(&p_buf).map(|(g, p)| g * p).sum();
                for k in 0..c {
                    let idx = (img * c + k) * hw + px;
                    let ga = g_alpha[k] + (g_prob[k] - gp_dot) / s;
                    grad[idx] = if logits[idx] > 0.0 { ga } else { 0.0 };
                }
            }
        }

        sums.wasserstein /= z;
        sums.mse /= z;
        sums.kl /= z;
        sums.total = w.w_wasserstein * sums.wasserstein
            + w.w_dice * sums.dice
            + kl_w * sums.kl
            + w.w_mse * sums.mse;
        sums
    }
}

/// `total_loss` with the uniform `Dir(1)` prior.
pub fn total_loss(
    logits: &Tensor,
    labels: &[u8],
    weights: &LossWeights,
    schedule: &AnnealSchedule,
    iteration: u64,
) -> Result<LossBreakdown> {
    EvidentialLoss::new(*weights, *schedule, 1.0)?.evaluate(logits, labels, iteration)
}

/// Gradient of [`total_loss`] with respect to the logits.
pub fn total_loss_gradient(
    logits: &Tensor,
    labels: &[u8],
    weights: &LossWeights,
    schedule: &AnnealSchedule,
    iteration: u64,
) -> Result<Tensor> {
    EvidentialLoss::new(*weights, *schedule, 1.0)?.gradient(logits, labels, iteration)
}

struct Geometry {
    n: usize,
    c: usize,
    hw: usize,
}

impl Geometry {
    fn check(logits: &Tensor, labels: &[u8]) -> Result<Self> {
        logits.expect_rank(4)?;
        let s = logits.shape();
        let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
        if c < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {c}")));
        }
        if n * hw == 0 {
            return Err(Error::Config("empty logit batch".into()));
        }
        if labels.len() != n * hw {
            return Err(Error::ShapeMismatch {
                expected: vec![n, s[2], s[3]],
                found: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= c) {
            return Err(Error::ClassOutOfRange {
                class: bad as usize,
                num_classes: c,
            });
        }
        if let Some(index) = logits.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { n, c, hw })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::belief;
    use proptest::prelude::*;

    fn params(alpha: &[f64]) -> DirichletParams {
        DirichletParams::from_alpha(alpha.to_vec()).unwrap()
    }

    fn ramp() -> AnnealSchedule {
        AnnealSchedule::full_scale(0.15)
    }

    #[test]
    fn mse_examples() {
        // vacuous belief over 3 classes: 2/3 + 1/6 = 5/6
        let p = params(&[1.0, 1.0, 1.0]);
        let v = mse_loss_pixel(&belief(&p), p.total(), &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        // alpha (5,1,1): 6/49 + 22/392
        let p = params(&[5.0, 1.0, 1.0]);
        let v = mse_loss_pixel(&belief(&p), p.total(), &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - (6.0 / 49.0 + 22.0 / 392.0)).abs() < 1e-15);
        assert!((v - 0.17857).abs() < 1e-5);
        // confident limit
        let p = params(&[1e12, 1.0, 1.0]);
        let v = mse_loss_pixel(&belief(&p), p.total(), &[1.0, 0.0, 0.0]).unwrap();
        assert!(v < 1e-11);
    }

    #[test]
    fn mse_rejects_non_one_hot() {
        let p = params(&[1.0, 1.0, 1.0]);
        let b = belief(&p);
        assert!(matches!(mse_loss_pixel(&b, 3.0, &[1.0, 1.0, 0.0]), Err(Error::NotOneHot)));
        assert!(matches!(mse_loss_pixel(&b, 3.0, &[0.5, 0.5, 0.0]), Err(Error::NotOneHot)));
        assert!(matches!(mse_loss_pixel(&b, 3.0, &[0.0, 0.0, 0.0]), Err(Error::NotOneHot)));
        assert!(mse_loss_pixel(&b, 3.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let b = PixelBelief {
            probabilities: vec![0.7, 0.2, 0.1],
            uncertainty: 0.5,
        };
        assert!((wasserstein_loss_pixel(&b, 0).unwrap() - 0.3).abs() < 1e-15);
        let b = belief(&params(&[1.0, 1.0, 1.0]));
        for y in 0..3 {
            assert!((wasserstein_loss_pixel(&b, y).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        }
        let b = belief(&params(&[5.0, 1.0, 1.0]));
        assert!((wasserstein_loss_pixel(&b, 0).unwrap() - 2.0 / 7.0).abs() < 1e-15);
        assert!(matches!(
            wasserstein_loss_pixel(&b, 3),
            Err(Error::ClassOutOfRange { class: 3, num_classes: 3 })
        ));
    }

    fn map(h: usize, w: usize, data: &[f64]) -> Tensor {
        Tensor::new(vec![h, w], data.to_vec()).unwrap()
    }

    #[test]
    fn dice_examples() {
        let mask = map(2, 3, &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(dice_loss_class(&mask, &mask).unwrap(), 0.0);
        let other = map(2, 3, &[0.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(dice_loss_class(&mask, &other).unwrap(), 1.0);
        let half = map(2, 2, &[0.5; 4]);
        let one = map(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((dice_loss_class(&half, &one).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // empty vs empty
        let empty = map(2, 2, &[0.0; 4]);
        assert_eq!(dice_loss_class(&empty, &empty).unwrap(), 0.0);
    }

    #[test]
    fn dice_rejects_bad_input() {
        let a = map(2, 2, &[0.5; 4]);
        let b = map(1, 4, &[0.0; 4]);
        assert!(matches!(dice_loss_class(&a, &b), Err(Error::ShapeMismatch { .. })));
        let bad_gt = map(2, 2, &[0.0, 0.5, 0.0, 0.0]);
        assert!(dice_loss_class(&a, &bad_gt).is_err());
    }

    #[test]
    fn kl_examples() {
        assert!(kl_to_prior_pixel(&params(&[1.0, 1.0, 1.0]), 1.0).unwrap().abs() < 1e-14);
        // alpha (2,1,1) against Dir(1): ln 3 - (1/2 + 1/3)
        let v = kl_to_prior_pixel(&params(&[2.0, 1.0, 1.0]), 1.0).unwrap();
        assert!((v - (3f64.ln() - 5.0 / 6.0)).abs() < 1e-12);
        assert!(kl_to_prior_pixel(&params(&[1.0, 1.0, 1.0]), 0.25).unwrap() > 0.0);
        assert!(kl_to_prior_pixel(&params(&[1.0, 1.0]), 0.0).is_err());
        assert!(kl_to_prior_pixel(&params(&[1.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn kl_weight_examples() {
        let s = ramp();
        assert_eq!(kl_weight(0, &s), 0.0);
        assert_eq!(kl_weight(40_000, &s), 0.0);
        assert_eq!(kl_weight(44_000, &s), 0.075);
        assert_eq!(kl_weight(48_000, &s), 0.15);
        assert_eq!(kl_weight(80_000, &s), 0.15);
    }

    #[test]
    fn schedule_and_weight_validation() {
        assert!(AnnealSchedule::new(10, 10, 0.1).is_err());
        assert!(AnnealSchedule::new(11, 10, 0.1).is_err());
        assert!(AnnealSchedule::new(0, 10, f64::NAN).is_err());
        assert!(LossWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 0.0, 0.0, 1.0).is_err());
        assert!(LossWeights::new(f64::INFINITY, 0.0, 0.0, 1.0).is_err());
        assert!(LossWeights::new(1.0, 0.75, 0.15, 0.45).is_ok());
    }

    fn zeros_batch(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::zeros(vec![n, c, h, w])
    }

    #[test]
    fn total_loss_vacuous_examples() {
        let logits = zeros_batch(2, 3, 3, 4);
        let labels: Vec<u8> = (0..24).map(|i| (i % 3) as u8).collect();
        let b = total_loss(&logits, &labels, &LossWeights::mse_only(), &ramp(), 0).unwrap();
        assert!((b.total - 5.0 / 6.0).abs() < 1e-14);
        assert!((b.mse - 5.0 / 6.0).abs() < 1e-14);
        let w = LossWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let b = total_loss(&logits, &labels, &w, &ramp(), 0).unwrap();
        assert!((b.total - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn total_loss_excludes_kl_before_ramp() {
        let logits = Tensor::new(vec![1, 3, 1, 2], vec![1.0, -1.0, 0.5, 2.0, 0.3, 0.0]).unwrap();
        let labels = [0u8, 2];
        let w = LossWeights::composite_default();
        let b = total_loss(&logits, &labels, &w, &ramp(), 0).unwrap();
        assert_eq!(b.kl_weight_used, 0.0);
        assert!(b.kl > 0.0);
        let expect = w.w_wasserstein * b.wasserstein + w.w_dice * b.dice + w.w_mse * b.mse;
        assert!((b.total - expect).abs() < 1e-12);
    }

    #[test]
    fn total_loss_rejects_bad_input() {
        let logits = zeros_batch(1, 3, 2, 2);
        let w = LossWeights::mse_only();
        assert!(matches!(
            total_loss(&logits, &[0, 1, 3, 0], &w, &ramp(), 0),
            Err(Error::ClassOutOfRange { class: 3, .. })
        ));
        assert!(matches!(
            total_loss(&logits, &[0, 1, 2], &w, &ramp(), 0),
            Err(Error::ShapeMismatch { .. })
        ));
        let flat = Tensor::zeros(vec![3, 4]);
        assert!(total_loss(&flat, &[0; 4], &w, &ramp(), 0).is_err());
    }

    #[test]
    fn wasserstein_gradient_single_pixel() {
        // alpha (5,1,1): logits (4, -1, -1) leave classes 2,3 in the dead zone
        let logits = Tensor::new(vec![1, 3, 1, 1], vec![4.0, -1.0, -1.0]).unwrap();
        let w = LossWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let g = total_loss_gradient(&logits, &[0], &w, &ramp(), 0).unwrap();
        assert!((g.data()[0] + 2.0 / 49.0).abs() < 1e-15);
        assert_eq!(&g.data()[1..], &[0.0, 0.0]);

        // with tiny positive logits on the other classes the full alpha-gradient shows up
        let eps = 1e-12;
        let logits = Tensor::new(vec![1, 3, 1, 1], vec![4.0 - 2.0 * eps, eps, eps]).unwrap();
        let g = total_loss_gradient(&logits, &[0], &w, &ramp(), 0).unwrap();
        let want = [-2.0 / 49.0, 5.0 / 49.0, 5.0 / 49.0];
        for (a, b) in g.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn dead_zone_gives_zero_gradient() {
        let logits = Tensor::new(vec![1, 3, 2, 1], vec![-0.5, -1.0, -2.0, -0.1, -3.0, 0.0]).unwrap();
        let w = LossWeights::composite_default();
        let g = total_loss_gradient(&logits, &[0, 2], &w, &ramp(), 80_000).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kl_gradient_vanishes_at_prior() {
        // all logits tiny positive: alpha ≈ 1 so the KL gradient ≈ 0
        let logits = Tensor::new(vec![1, 3, 1, 1], vec![1e-12; 3]).unwrap();
        let w = LossWeights::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let s = AnnealSchedule::new(0, 1, 1.0).unwrap();
        let g = total_loss_gradient(&logits, &[1], &w, &s, 5).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-10));
    }

    proptest! {
        #[test]
        fn kl_weight_monotone(a in 0u64..200, b in 0u64..200, start in 0u64..50, len in 1u64..100) {
            let s = AnnealSchedule::new(start, start + len, 0.3).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(kl_weight(lo, &s) <= kl_weight(hi, &s));
        }

        #[test]
        fn wasserstein_bounds(logits in prop::collection::vec(-5.0f64..20.0, 2..6), y in 0usize..6) {
            let b = crate::dirichlet::belief_from_logits(&logits).unwrap();
            let y = y % logits.len();
            let v = wasserstein_loss_pixel(&b, y).unwrap();
            prop_assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn wasserstein_bound_at_zero_evidence() {
        for c in 2..6 {
            let b = belief(&DirichletParams::from_alpha(vec![1.0; c]).unwrap());
            let v = wasserstein_loss_pixel(&b, 0).unwrap();
            assert!((v - (c as f64 - 1.0) / c as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn breakdown_identity_holds() {
        let logits = Tensor::new(
            vec![2, 2, 1, 2],
            vec![0.3, 1.2, -0.4, 2.0, 1.5, -1.0, 0.7, 0.2],
        )
        .unwrap();
        let w = LossWeights::new(0.6, 0.2, 0.3, 0.9).unwrap();
        let s = AnnealSchedule::new(0, 10, 0.3).unwrap();
        let b = total_loss(&logits, &[0, 1, 1, 0], &w, &s, 5).unwrap();
        assert_eq!(b.kl_weight_used, 0.15);
        let rebuilt = 0.6 * b.wasserstein + 0.2 * b.dice + 0.15 * b.kl + 0.9 * b.mse;
        assert!((b.total - rebuilt).abs() < 1e-9);
    }
}
