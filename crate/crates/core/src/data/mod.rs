//! Deterministic "shapes world" segmentation data.
//!
//! Training images contain non-overlapping squares, circles and triangles on
//! a gray background; every evaluation image additionally contains exactly
//! one cross, the held-out OOD shape. Cross pixels keep the background label
//! and are flagged only in the OOD mask.

mod format;
mod render;

pub use format::{read_split, write_split, FORMAT_VERSION, MAGIC};
pub use render::{paint_shape, ShapeKind};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rejection-sampling budget per shape.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
pub const BACKGROUND_CLASS: u8 = 0;
pub const TRAIN_FILE: &str = "train.edsd";
pub const EVAL_FILE: &str = "eval.edsd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub height: usize,
    pub width: usize,
    pub num_train: usize,
    pub num_eval: usize,
    pub shape_classes: Vec<ShapeKind>,
    pub ood_shape: ShapeKind,
    pub noise_std: f64,
    pub min_radius: usize,
    pub max_radius: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            num_train: 256,
            num_eval: 50,
            shape_classes: vec![ShapeKind::Square, ShapeKind::Circle, ShapeKind::Triangle],
            ood_shape: ShapeKind::Cross,
            noise_std: 0.05,
            min_radius: 4,
            max_radius: 9,
            min_shapes: 1,
            max_shapes: 3,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    /// Background plus one class per in-distribution shape.
    pub fn num_classes(&self) -> usize {
        self.shape_classes.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.shape_classes.is_empty() {
            return fail("shape_classes must not be empty".into());
        }
        if self.shape_classes.contains(&self.ood_shape) {
            return fail(format!("ood_shape {:?} is also an in-distribution class", self.ood_shape));
        }
        let mut seen = self.shape_classes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.shape_classes.len() {
            return fail("shape_classes contains duplicates".into());
        }
        if self.num_classes() > u8::MAX as usize {
            return fail("too many classes for 8-bit labels".into());
        }
        if self.height == 0 || self.width == 0 || self.height > u16::MAX as usize || self.width > u16::MAX as usize {
            return fail(format!("invalid image size {}x{}", self.height, self.width));
        }
        if self.min_radius == 0 || self.min_radius > self.max_radius {
            return fail(format!(
                "radius range {}..={} is invalid",
                self.min_radius, self.max_radius
            ));
        }
        if self.min_shapes > self.max_shapes {
            return fail(format!(
                "shape count range {}..={} is invalid",
                self.min_shapes, self.max_shapes
            ));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return fail(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        Ok(())
    }

    fn class_of(&self, kind: ShapeKind) -> u8 {
        self.shape_classes.iter().position(|k| *k == kind).map_or(BACKGROUND_CLASS, |i| i as u8 + 1)
    }
}

/// One image with per-pixel labels and OOD mask.
///
/// The image is stored as 8-bit levels in channel-major `[3, H, W]` order;
/// [`Sample::pixel_values`] maps them to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub height: usize,
    pub width: usize,
    pub image: Vec<u8>,
    pub labels: Vec<u8>,
    pub ood_mask: Vec<bool>,
}

impl Sample {
    pub fn blank(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            image: vec![0; 3 * height * width],
            labels: vec![BACKGROUND_CLASS; height * width],
            ood_mask: vec![false; height * width],
        }
    }

    pub fn pixel_values(&self) -> Vec<f64> {
        self.image.iter().map(|&v| v as f64 / 255.0).collect()
    }

    pub fn ood_pixels(&self) -> usize {
        self.ood_mask.iter().filter(|&&m| m).count()
    }
}

/// A split: samples sharing image size and class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub samples: Vec<Sample>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Training data must carry no OOD pixels and only known labels.
    pub fn check_training_contract(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.ood_mask.iter().any(|&m| m) {
                return Err(Error::DataContract(format!(
                    "training sample {i} contains OOD pixels"
                )));
            }
            if let Some(&l) = s.labels.iter().find(|&&l| l as usize >= self.num_classes) {
                return Err(Error::DataContract(format!(
                    "training sample {i} carries label {l} outside the {} known classes",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub train: Split,
    pub eval: Split,
}

impl Dataset {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_split(&dir.join(TRAIN_FILE), &self.train)?;
        write_split(&dir.join(EVAL_FILE), &self.eval)?;
        Ok(())
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    Ok(Dataset {
        train: read_split(&dir.join(TRAIN_FILE))?,
        eval: read_split(&dir.join(EVAL_FILE))?,
    })
}

pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let make = |tag: u64, count: usize, with_ood: bool| -> Result<Split> {
        let samples = (0..count)
            .map(|i| generate_sample(config, sample_seed(config.seed, tag, i as u64), i, with_ood))
            .collect::<Result<Vec<_>>>()?;
        Ok(Split {
            num_classes: config.num_classes(),
            height: config.height,
            width: config.width,
            samples,
        })
    };
    Ok(Dataset {
        train: make(0x7472_6169_6e00, config.num_train, false)?,
        eval: make(0x6576_616c_0000, config.num_eval, true)?,
    })
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sample; independent of generation order.
pub fn sample_seed(seed: u64, split_tag: u64, index: u64) -> u64 {
    mix(seed ^ mix(split_tag ^ mix(index)))
}

#[derive(Clone, Copy)]
struct Placed {
    cy: usize,
    cx: usize,
    r: usize,
}

impl Placed {
    /// Boxes closer than one pixel would let shapes touch.
    fn conflicts(&self, other: &Placed) -> bool {
        let gap = |a: usize, ra: usize, b: usize, rb: usize| a.abs_diff(b) <= ra + rb + 1;
        gap(self.cy, self.r, other.cy, other.r) && gap(self.cx, self.r, other.cx, other.r)
    }
}

fn generate_sample(config: &DatasetConfig, seed: u64, index: usize, with_ood: bool) -> Result<Sample> {
    let mut geo = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 0x6e6f_6973_65));
    let (h, w) = (config.height, config.width);

    let count = geo.random_range(config.min_shapes..=config.max_shapes);
    let mut kinds = Vec::with_capacity(count + 1);
    if with_ood {
        kinds.push(config.ood_shape);
    }
    for _ in 0..count {
        kinds.push(config.shape_classes[geo.random_range(0..config.shape_classes.len())]);
    }

    let mut placed: Vec<Placed> = Vec::with_capacity(kinds.len());
    for _ in &kinds {
        let mut ok = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let r = geo.random_range(config.min_radius..=config.max_radius);
            if 2 * r + 1 > h || 2 * r + 1 > w {
                continue;
            }
            let cand = Placed {
                cy: geo.random_range(r..h - r),
                cx: geo.random_range(r..w - r),
                r,
            };
            if placed.iter().all(|p| !p.conflicts(&cand)) {
                ok = Some(cand);
                break;
            }
        }
        placed.push(ok.ok_or(Error::Placement {
            sample: index,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?);
    }

    let mut canvas = vec![0.0f64; 3 * h * w];
    for (c, &v) in render::BACKGROUND_RGB.iter().enumerate() {
        canvas[c * h * w..(c + 1) * h * w].iter_mut().for_each(|p| *p = v);
    }
    let mut sample = Sample::blank(h, w);
    for (kind, at) in kinds.iter().zip(&placed) {
        let is_ood = *kind == config.ood_shape;
        let base = if is_ood && geo.random_bool(0.5) {
            let borrowed = config.shape_classes[geo.random_range(0..config.shape_classes.len())];
            borrowed.color()
        } else {
            kind.color()
        };
        let jitter = geo.random_range(0.9..=1.1);
        let rgb = base.map(|v| (v * jitter).clamp(0.0, 1.0));
        let label = if is_ood { BACKGROUND_CLASS } else { config.class_of(*kind) };
        paint_shape(*kind, at.cy, at.cx, at.r, w, |idx| {
            for (c, v) in rgb.iter().enumerate() {
                canvas[c * h * w + idx] = *v;
            }
            sample.labels[idx] = label;
            sample.ood_mask[idx] = is_ood;
        });
    }

    if config.noise_std > 0.0 {
        let normal = Normal::new(0.0, config.noise_std).map_err(|e| Error::Config(e.to_string()))?;
        for v in canvas.iter_mut() {
            *v += normal.sample(&mut noise_rng);
        }
    }
    sample.image = canvas
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    Ok(sample)
}
