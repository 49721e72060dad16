//! Run configuration file: `[data]`, `[model]`, `[train]`, `[loss]`, `[eval]`.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected so a typo in a loss weight cannot silently fall back to a default.

use std::path::Path;

use edlseg::data::DatasetConfig;
use edlseg::losses::{AnnealSchedule, LossWeights};
use edlseg::metrics::default_thresholds;
use edlseg::nn::{SegNetConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DatasetConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub loss: LossSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_channels: usize,
    pub depth: usize,
    pub kernel_size: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = SegNetConfig::default();
        Self {
            hidden_channels: d.hidden_channels,
            depth: d.depth,
            kernel_size: d.kernel_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub total_iterations: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub prior_concentration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_decay_power: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::desk_scale(LossWeights::mse_only());
        Self {
            batch_size: d.batch_size,
            total_iterations: d.total_iterations,
            learning_rate: d.learning_rate,
            weight_decay: d.weight_decay,
            seed: d.seed,
            checkpoint_every: d.checkpoint_every,
            prior_concentration: d.prior_concentration,
            lr_decay_power: d.lr_decay_power,
        }
    }
}

/// Loss weights plus the KL ramp; the ramp plateau is `w_kl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub w_wasserstein: f64,
    pub w_dice: f64,
    pub w_kl: f64,
    pub w_mse: f64,
    pub kl_ramp_start: u64,
    pub kl_ramp_end: u64,
}

impl Default for LossSection {
    fn default() -> Self {
        let w = LossWeights::composite_default();
        let d = TrainConfig::desk_scale(w);
        Self {
            w_wasserstein: w.w_wasserstein,
            w_dice: w.w_dice,
            w_kl: w.w_kl,
            w_mse: w.w_mse,
            kl_ramp_start: d.anneal.ramp_start,
            kl_ramp_end: d.anneal.ramp_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Score thresholds for the segment-level metrics.
    pub thresholds: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds: default_thresholds(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    /// `None` gives the built-in defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.data.validate()?;
        self.segnet_config(self.data.num_classes()).validate()?;
        self.train_config()?.validate()?;
        if self.eval.thresholds.is_empty() {
            return Err(CliError::usage("[eval] thresholds must not be empty"));
        }
        if let Some(t) = self.eval.thresholds.iter().find(|t| !t.is_finite()) {
            return Err(CliError::usage(format!("[eval] threshold {t} is not finite")));
        }
        Ok(())
    }

    pub fn segnet_config(&self, num_classes: usize) -> SegNetConfig {
        SegNetConfig {
            in_channels: 3,
            hidden_channels: self.model.hidden_channels,
            depth: self.model.depth,
            num_classes,
            kernel_size: self.model.kernel_size,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            w_wasserstein: self.loss.w_wasserstein,
            w_dice: self.loss.w_dice,
            w_kl: self.loss.w_kl,
            w_mse: self.loss.w_mse,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        Ok(TrainConfig {
            batch_size: t.batch_size,
            total_iterations: t.total_iterations,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            seed: t.seed,
            loss_weights: self.loss_weights(),
            anneal: AnnealSchedule {
                ramp_start: self.loss.kl_ramp_start,
                ramp_end: self.loss.kl_ramp_end,
                plateau: self.loss.w_kl,
            },
            checkpoint_every: t.checkpoint_every,
            prior_concentration: t.prior_concentration,
            lr_decay_power: t.lr_decay_power,
        })
    }

    /// Fully resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the resolved configuration, so formatting and comments in
    /// the source file do not change it.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = RunConfig::parse("[data]\nheight = 32\nnoise_stdd = 0.1\n").unwrap_err();
        assert_eq!(err.code, crate::exit::USAGE);
        assert!(err.message.contains("noise_stdd"), "{}", err.message);
        assert!(err.message.contains("line 3"), "{}", err.message);
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(RunConfig::parse("[optim]\nlr = 1.0\n").is_err());
    }

    #[test]
    fn resolved_form_round_trips_and_hash_ignores_formatting() {
        let a = RunConfig::parse("[loss]\nw_mse = 1.0\nw_wasserstein = 0.0\n").unwrap();
        let b = RunConfig::parse("# comment\n[loss]\nw_wasserstein = 0.0\n\nw_mse   = 1.0\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(RunConfig::parse(&a.to_toml()).unwrap(), a);
        assert_ne!(a.hash(), RunConfig::default().hash());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for bad in [
            "[loss]\nw_kl = -1.0\n",
            "[loss]\nkl_ramp_start = 10\nkl_ramp_end = 5\n",
            "[model]\nkernel_size = 4\n",
            "[eval]\nthresholds = []\n",
            "[data]\nood_shape = \"square\"\n",
            "[train]\nbatch_size = 0\n",
        ] {
            assert_eq!(RunConfig::parse(bad).unwrap_err().code, crate::exit::USAGE, "{bad}");
        }
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
