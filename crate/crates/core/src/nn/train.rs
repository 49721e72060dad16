use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::checkpoint::Checkpoint;
use super::segnet::{SegNet, SegNetConfig};
use super::tape::Tape;
use crate::data::{Sample, Split};
use crate::dirichlet::PixelBelief;
use crate::error::{Error, Result};
use crate::losses::{AnnealSchedule, EvidentialLoss, LossBreakdown, LossWeights};
use crate::tensor::Tensor;

/// Full-scale training recipe, kept for reference; desk-scale defaults are used instead.
pub const FULL_SCALE_BATCH_SIZE: usize = 4;
pub const FULL_SCALE_ITERATIONS: u64 = 80_000;
pub const FULL_SCALE_LEARNING_RATE: f64 = 3e-4;
pub const FULL_SCALE_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_iterations: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss_weights: LossWeights,
    /// KL ramp; its plateau must equal `loss_weights.w_kl`.
    pub anneal: AnnealSchedule,
    /// Checkpoint cadence in iterations; 0 disables intermediate checkpoints.
    pub checkpoint_every: u64,
    pub prior_concentration: f64,
    /// Polynomial learning-rate decay power; `None` keeps the rate constant.
    pub lr_decay_power: Option<f64>,
}

impl TrainConfig {
    /// Desk-scale defaults with the KL ramp placed at 50%..60% of the run.
    pub fn desk_scale(loss_weights: LossWeights) -> Self {
        Self {
            batch_size: 8,
            total_iterations: 2000,
            learning_rate: 1e-3,
            weight_decay: FULL_SCALE_WEIGHT_DECAY,
            seed: 0,
            loss_weights,
            anneal: AnnealSchedule {
                ramp_start: 1000,
                ramp_end: 1200,
                plateau: loss_weights.w_kl,
            },
            checkpoint_every: 500,
            prior_concentration: 1.0,
            lr_decay_power: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_weights.validate()?;
        self.anneal.validate()?;
        if self.anneal.plateau != self.loss_weights.w_kl {
            return Err(Error::Config(format!(
                "KL ramp plateau {} differs from w_kl {}",
                self.anneal.plateau, self.loss_weights.w_kl
            )));
        }
        if self.batch_size == 0 || self.total_iterations == 0 {
            return Err(Error::Config("batch_size and total_iterations must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("invalid weight decay {}", self.weight_decay)));
        }
        if let Some(p) = self.lr_decay_power {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Config(format!("invalid decay power {p}")));
            }
        }
        Ok(())
    }

    fn learning_rate_at(&self, t: u64) -> f64 {
        match self.lr_decay_power {
            None => self.learning_rate,
            Some(power) => {
                let done = (t - 1) as f64 / self.total_iterations as f64;
                self.learning_rate * (1.0 - done).powf(power)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iteration: u64,
    pub breakdown: LossBreakdown,
}

/// Tab-separated: iteration, total, wasserstein, dice, kl, mse, kl_weight_used.
pub fn format_log_line(r: &TrainRecord) -> String {
    let b = &r.breakdown;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.iteration, b.total, b.wasserstein, b.dice, b.kl, b.mse, b.kl_weight_used
    )
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: SegNet,
    pub checkpoint: Checkpoint,
    pub log: Vec<TrainRecord>,
}

fn batch_tensor(samples: &[&Sample]) -> Result<(Tensor, Vec<u8>)> {
    let (h, w) = (samples[0].height, samples[0].width);
    let mut data = Vec::with_capacity(samples.len() * 3 * h * w);
    let mut labels = Vec::with_capacity(samples.len() * h * w);
    for s in samples {
        data.extend(s.pixel_values());
        labels.extend_from_slice(&s.labels);
    }
    Ok((Tensor::new(vec![samples.len(), 3, h, w], data)?, labels))
}

/// Single-threaded, deterministic training. `on_checkpoint` sees every
/// intermediate checkpoint at the configured cadence.
pub fn train(
    split: &Split,
    net_config: SegNetConfig,
    config: &TrainConfig,
    mut on_checkpoint: impl FnMut(u64, &Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    split.check_training_contract()?;
    if net_config.num_classes != split.num_classes || net_config.in_channels != 3 {
        return Err(Error::Config(format!(
            "network expects {} classes and {} channels, data has {} classes and 3 channels",
            net_config.num_classes, net_config.in_channels, split.num_classes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = SegNet::init(net_config, &mut rng)?;
    let loss = EvidentialLoss::new(config.loss_weights, config.anneal, config.prior_concentration)?;
    let mut adam = AdamState::for_params(net.params());
    let mut log = Vec::with_capacity(config.total_iterations as usize);

    for t in 1..=config.total_iterations {
        let picks: Vec<&Sample> = (0..config.batch_size)
            .map(|_| &split.samples[rng.random_range(0..split.len())])
            .collect();
        let (images, labels) = batch_tensor(&picks)?;

        let mut tape = Tape::new();
        let (logits, param_vars) = net.record(&mut tape, &images)?;
        let (loss_var, breakdown) = tape.evidential_loss(logits, &labels, &loss, t)?;
        let grads = tape.backward(loss_var)?;
        let grad_bufs: Vec<Vec<f64>> = net
            .params()
            .iter()
            .zip(&param_vars)
            .map(|(p, v)| grads.get(*v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
            .collect();
        adam_step(
            net.params_mut(),
            &grad_bufs,
            &mut adam,
            config.learning_rate_at(t),
            config.weight_decay,
            t,
        )?;
        log.push(TrainRecord { iteration: t, breakdown });

        if config.checkpoint_every > 0 && t % config.checkpoint_every == 0 {
            on_checkpoint(t, &Checkpoint::from_net(&net))?;
        }
    }

    let checkpoint = Checkpoint::from_net(&net);
    Ok(TrainOutcome { net, checkpoint, log })
}

/// Per-pixel beliefs of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMap {
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    /// `[C, H, W]` expected probabilities.
    pub probabilities: Vec<f64>,
    /// `[H, W]` vacuity `C / S`.
    pub uncertainty: Vec<f64>,
}

impl BeliefMap {
    /// From a `[1, C, H, W]` or `[C, H, W]` logit map.
    pub fn from_logits(logits: &Tensor) -> Result<Self> {
        let s = logits.shape();
        let (c, h, w) = match *s {
            [1, c, h, w] | [c, h, w] => (c, h, w),
            _ => {
                return Err(Error::ShapeMismatch {
                    expected: vec![1, 0, 0, 0],
                    found: s.to_vec(),
                })
            }
        };
        let hw = h * w;
        let d = logits.data();
        let mut probabilities = vec![0.0; c * hw];
        let mut uncertainty = vec![0.0; hw];
        for px in 0..hw {
            let total: f64 = (0..c).map(|k| crate::dirichlet::relu(d[k * hw + px]) + 1.0).sum();
            for k in 0..c {
                probabilities[k * hw + px] = (crate::dirichlet::relu(d[k * hw + px]) + 1.0) / total;
            }
            uncertainty[px] = c as f64 / total;
        }
        Ok(Self {
            num_classes: c,
            height: h,
            width: w,
            probabilities,
            uncertainty,
        })
    }

    pub fn pixel(&self, index: usize) -> PixelBelief {
        let hw = self.height * self.width;
        PixelBelief {
            probabilities: (0..self.num_classes).map(|k| self.probabilities[k * hw + index]).collect(),
            uncertainty: self.uncertainty[index],
        }
    }

    /// Most probable class per pixel; ties resolve to the lowest index.
    pub fn predicted_labels(&self) -> Vec<u8> {
        let hw = self.height * self.width;
        (0..hw)
            .map(|px| {
                let mut best = 0;
                for k in 1..self.num_classes {
                    if self.probabilities[k * hw + px] > self.probabilities[best * hw + px] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect()
    }
}

/// Beliefs for one `[3, H, W]` image.
pub fn predict(checkpoint: &Checkpoint, image: &Tensor) -> Result<BeliefMap> {
    predict_with(&checkpoint.to_net()?, image)
}

pub(crate) fn predict_with(net: &SegNet, image: &Tensor) -> Result<BeliefMap> {
    image.expect_rank(3)?;
    let mut shape = vec![1];
    shape.extend_from_slice(image.shape());
    let batch = Tensor::new(shape, image.data().to_vec())?;
    BeliefMap::from_logits(&net.forward(&batch)?)
}

impl Sample {
    pub fn image_tensor(&self) -> Tensor {
        Tensor::new(vec![3, self.height, self.width], self.pixel_values()).expect("sample image is 3xHxW")
    }
}
