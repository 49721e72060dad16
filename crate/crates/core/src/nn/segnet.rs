use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully convolutional net: `depth` same-padded convolutions, ReLU between
/// them, raw logits out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegNetConfig {
    pub in_channels: usize,
    pub hidden_channels: usize,
    pub depth: usize,
    pub num_classes: usize,
    pub kernel_size: usize,
}

impl Default for SegNetConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            hidden_channels: 16,
            depth: 3,
            num_classes: 4,
            kernel_size: 3,
        }
    }
}

impl SegNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{m}: {self:?}")));
        if self.depth < 2 {
            return bad("depth must be at least 2");
        }
        if self.kernel_size % 2 == 0 {
            return bad("kernel_size must be odd");
        }
        if self.in_channels == 0 || self.hidden_channels == 0 {
            return bad("channel counts must be positive");
        }
        if self.num_classes < 2 {
            return bad("need at least 2 classes");
        }
        Ok(())
    }

    /// `(out, in)` channels of each convolution.
    pub fn layer_channels(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|l| {
                let c_in = if l == 0 { self.in_channels } else { self.hidden_channels };
                let c_out = if l + 1 == self.depth { self.num_classes } else { self.hidden_channels };
                (c_out, c_in)
            })
            .collect()
    }

    /// Parameter shapes in declaration order: weight then bias per layer.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let k = self.kernel_size;
        self.layer_channels()
            .into_iter()
            .flat_map(|(o, i)| [vec![o, i, k, k], vec![o]])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegNet {
    config: SegNetConfig,
    params: Vec<Tensor>,
}

impl SegNet {
    /// He-normal weights, zero biases.
    pub fn init<R: Rng>(config: SegNetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let k2 = config.kernel_size * config.kernel_size;
        let params = config
            .param_shapes()
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(shape);
                }
                let std = (2.0 / (shape[1] * k2) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("std is positive");
                let n = shape.iter().product();
                let data = (0..n).map(|_| normal.sample(rng)).collect();
                Tensor::new(shape, data).expect("length matches shape")
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn zeros(config: SegNetConfig) -> Result<Self> {
        config.validate()?;
        let params = config.param_shapes().into_iter().map(Tensor::zeros).collect();
        Ok(Self { config, params })
    }

    pub fn from_params(config: SegNetConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (s, p) in shapes.iter().zip(&params) {
            p.expect_shape(s)?;
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &SegNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check_images(&self, images: &Tensor) -> Result<()> {
        images.expect_rank(4)?;
        let s = images.shape();
        if s[1] != self.config.in_channels {
            return Err(Error::ShapeMismatch {
                expected: vec![s[0], self.config.in_channels, s[2], s[3]],
                found: s.to_vec(),
            });
        }
        if let Some(&v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain {
                name: "image value",
                value: v,
            });
        }
        Ok(())
    }

    /// Records the forward pass on `tape`; returns the logit node and the
    /// parameter leaves in declaration order.
    pub fn record(&self, tape: &mut Tape, images: &Tensor) -> Result<(Var, Vec<Var>)> {
        self.check_images(images)?;
        let param_vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let mut x = tape.leaf(images.clone());
        for layer in 0..self.config.depth {
            x = tape.conv2d(x, param_vars[2 * layer], param_vars[2 * layer + 1])?;
            if layer + 1 < self.config.depth {
                x = tape.relu(x)?;
            }
        }
        Ok((x, param_vars))
    }

    /// Logits `[N, C, H, W]` for images `[N, in_channels, H, W]` with values in `[0, 1]`.
    pub fn forward(&self, images: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let (logits, _) = self.record(&mut tape, images)?;
        Ok(tape.value(logits)?.clone())
    }

    /// Copies the gradients of one backward pass into the parameters' gradient slots.
    pub fn store_grads(&mut self, grads: &super::Gradients, param_vars: &[Var]) -> Result<()> {
        for (p, v) in self.params.iter_mut().zip(param_vars) {
            let g = grads.get(*v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec);
            p.set_grad(g)?;
        }
        Ok(())
    }
}
