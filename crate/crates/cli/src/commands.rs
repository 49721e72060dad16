use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use edlseg::data::{generate_dataset, read_split, Split, EVAL_FILE, TRAIN_FILE};
use edlseg::dirichlet::DirichletParams;
use edlseg::losses::gradcheck::{self, GradCheckReport, GradientFn};
use edlseg::losses::{kl_to_prior_pixel, LossBreakdown};
use edlseg::metrics::{evaluate, quantize_unit, write_pgm16, EvalReport, ScoreMethod};
use edlseg::nn::{format_log_line, predict, train, Checkpoint};
use edlseg::tensor::Tensor;
use serde::Serialize;

use crate::config::{sha256_hex, RunConfig};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const TRAIN_LOG_FILE: &str = "train.log";
pub const FINAL_CHECKPOINT_FILE: &str = "final.edlc";

pub fn checkpoint_file_name(iteration: u64) -> String {
    format!("checkpoint_{iteration:06}.edlc")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn load_split(path: &Path) -> Result<Split, CliError> {
    read_split(path).map_err(|e| CliError::from(e).context(path.display()))
}

/// Written next to the generated splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub num_train: usize,
    pub num_eval: usize,
    pub train_sha256: String,
    pub eval_sha256: String,
}

pub fn cmd_generate_data(config: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let ds = generate_dataset(&config.data)?;
    create_dir(out)?;
    ds.save(out)?;
    let digest = |name: &str| -> Result<String, CliError> {
        let bytes = fs::read(out.join(name))?;
        Ok(sha256_hex(&bytes))
    };
    let manifest = Manifest {
        seed: config.data.seed,
        config_sha256: config.hash(),
        num_classes: config.data.num_classes(),
        height: config.data.height,
        width: config.data.width,
        num_train: ds.train.len(),
        num_eval: ds.eval.len(),
        train_sha256: digest(TRAIN_FILE)?,
        eval_sha256: digest(EVAL_FILE)?,
    };
    write(&out.join(CONFIG_ECHO_FILE), config.to_toml().as_bytes())?;
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write(&out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub final_checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub iterations: u64,
    pub last: LossBreakdown,
}

/// Trains on `<data>/train.edsd`; writes checkpoints, the final checkpoint,
/// the resolved config and a log whose `#` header echoes that config.
pub fn cmd_train(config: &RunConfig, data: &Path, out: &Path) -> Result<TrainSummary, CliError> {
    let split = load_split(&data.join(TRAIN_FILE))?;
    let train_cfg = config.train_config()?;
    create_dir(out)?;

    let mut checkpoints = Vec::new();
    let outcome = train(&split, config.segnet_config(split.num_classes), &train_cfg, |t, ckpt| {
        let path = out.join(checkpoint_file_name(t));
        ckpt.save(&path)?;
        checkpoints.push(path);
        Ok(())
    })?;

    let resolved = config.to_toml();
    let mut log = format!("# config_sha256 = {}\n", config.hash());
    for line in resolved.lines() {
        let _ = writeln!(log, "# {line}");
    }
    log.push_str("# iteration\ttotal\twasserstein\tdice\tkl\tmse\tkl_weight_used\n");
    for r in &outcome.log {
        log.push_str(&format_log_line(r));
        log.push('\n');
    }
    write(&out.join(TRAIN_LOG_FILE), log.as_bytes())?;
    write(&out.join(CONFIG_ECHO_FILE), resolved.as_bytes())?;
    let final_checkpoint = out.join(FINAL_CHECKPOINT_FILE);
    outcome.checkpoint.save(&final_checkpoint)?;

    Ok(TrainSummary {
        final_checkpoint,
        checkpoints,
        iterations: train_cfg.total_iterations,
        last: outcome.log.last().map(|r| r.breakdown).unwrap_or_default(),
    })
}

/// Comma-separated method list, e.g. `uncertainty,entropy`.
pub fn parse_methods(list: &str) -> Result<Vec<ScoreMethod>, CliError> {
    let methods = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ScoreMethod>().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(CliError::usage("--methods is empty (valid: uncertainty, max_softmax, entropy)"));
    }
    Ok(methods)
}

pub fn cmd_evaluate(
    checkpoint: &Path,
    data: &Path,
    methods: &[ScoreMethod],
    thresholds: &[f64],
    workers: usize,
) -> Result<Vec<EvalReport>, CliError> {
    if workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| CliError::from(e).context(checkpoint.display()))?;
    let split = load_split(&data.join(EVAL_FILE))?;
    Ok(evaluate(&ckpt, &split, methods, thresholds, workers)?)
}

pub fn cmd_grad_check(trials: usize, seed: u64) -> Result<GradCheckReport, CliError> {
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    Ok(gradcheck::run(trials, seed)?)
}

/// Same as [`cmd_grad_check`] against a caller-supplied gradient.
pub fn cmd_grad_check_with(trials: usize, seed: u64, gradient: &GradientFn<'_>) -> Result<GradCheckReport, CliError> {
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    Ok(gradcheck::run_with(trials, seed, gradient)?)
}

const KL_TABLE_ALPHAS: &[&[f64]] = &[
    &[1.0, 1.0],
    &[2.0, 1.0],
    &[10.0, 1.0],
    &[1.0, 1.0, 1.0],
    &[2.0, 1.0, 1.0],
    &[5.0, 1.0, 1.0],
    &[20.0, 1.0, 1.0],
    &[5.0, 5.0, 5.0],
    &[1.0, 1.0, 1.0, 1.0],
    &[10.0, 2.0, 1.0, 1.0],
    &[1.0, 1.0, 1.0, 1.0, 1.0],
    &[3.0, 3.0, 1.0, 1.0, 1.0],
];

/// `KL[Dir(alpha) || Dir(a0)]` for a fixed set of alphas and a0 in {1, 0.25}.
pub fn cmd_kl_table() -> Result<String, CliError> {
    let mut out = String::from("alpha\tkl_a0_1\tkl_a0_0.25\n");
    for alpha in KL_TABLE_ALPHAS {
        let params = DirichletParams::from_alpha(alpha.to_vec())?;
        let text: Vec<String> = alpha.iter().map(|a| format!("{a}")).collect();
        let _ = writeln!(
            out,
            "({})\t{:.6}\t{:.6}",
            text.join(","),
            kl_to_prior_pixel(&params, 1.0)?,
            kl_to_prior_pixel(&params, 0.25)?
        );
    }
    Ok(out)
}

pub enum HeatmapSource<'a> {
    /// Image `index` of `<data>/eval.edsd`.
    EvalImage { data: &'a Path, index: usize },
    /// Binary 8-bit RGB PPM (`P6`).
    Ppm(&'a Path),
}

/// Writes the uncertainty map as a 16-bit PGM and returns `(width, height, pixels)`.
pub fn cmd_heatmap(
    checkpoint: &Path,
    source: HeatmapSource<'_>,
    out: &Path,
) -> Result<(usize, usize, Vec<u16>), CliError> {
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| CliError::from(e).context(checkpoint.display()))?;
    let image = match source {
        HeatmapSource::EvalImage { data, index } => {
            let split = load_split(&data.join(EVAL_FILE))?;
            let sample = split.samples.get(index).ok_or_else(|| {
                CliError::usage(format!("--index {index} out of range ({} eval images)", split.len()))
            })?;
            sample.image_tensor()
        }
        HeatmapSource::Ppm(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
            read_ppm(&bytes).map_err(|e| e.context(path.display()))?
        }
    };
    let belief = predict(&ckpt, &image)?;
    let pixels: Vec<u16> = belief.uncertainty.iter().map(|&u| quantize_unit(u)).collect();
    write_pgm16(out, belief.width, belief.height, &pixels).map_err(|e| CliError::from(e).context(out.display()))?;
    Ok((belief.width, belief.height, pixels))
}

/// Parses an 8-bit binary PPM into a `[3, H, W]` tensor in [0, 1].
fn read_ppm(bytes: &[u8]) -> Result<Tensor, CliError> {
    let bad = |m: &str| CliError::io(format!("not an 8-bit P6 image: {m}"));
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(bad("wrong magic"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let raster = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    if raster.len() != 3 * w * h || w == 0 || h == 0 {
        return Err(bad("raster size does not match header"));
    }
    let mut chw = vec![0.0; 3 * h * w];
    for (px, rgb) in raster.chunks_exact(3).enumerate() {
        for c in 0..3 {
            chw[c * h * w + px] = rgb[c] as f64 / 255.0;
        }
    }
    Ok(Tensor::new(vec![3, h, w], chw)?)
}
