use std::fmt::Write as _;

use rayon::prelude::*;

use super::calibration::{ece, DEFAULT_ECE_BINS};
use super::curve::{auprc, fpr_at_95_tpr, precision_recall_curve, ScoredPixels};
use super::scores::ScoreMethod;
use super::segment::{segment_level_metrics, SegmentInput};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::nn::{predict_with, BeliefMap, Checkpoint};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: ScoreMethod,
    pub auprc: f64,
    pub fpr95: f64,
    pub mean_siou: f64,
    pub mean_ppv: f64,
    pub mean_f1: f64,
    pub ece: f64,
    pub images: usize,
}

pub const REPORT_HEADER: &str = "method\tAuPRC\tFPR95\tsIoU\tPPV\tF1\tECE\timages";

impl EvalReport {
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
            self.method, self.auprc, self.fpr95, self.mean_siou, self.mean_ppv, self.mean_f1, self.ece, self.images
        )
    }
}

pub fn reports_to_tsv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.tsv_row());
    }
    out
}

/// Runs the checkpoint over `split` once and scores every method.
///
/// `workers` sizes the thread pool used for per-image prediction and
/// scoring; results do not depend on it.
pub fn evaluate(
    checkpoint: &Checkpoint,
    split: &Split,
    methods: &[ScoreMethod],
    thresholds: &[f64],
    workers: usize,
) -> Result<Vec<EvalReport>> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no evaluation methods given".into()));
    }
    if split.is_empty() {
        return Err(Error::Metric("evaluation split is empty".into()));
    }
    let net = checkpoint.to_net()?;
    if net.config().num_classes != split.num_classes {
        return Err(Error::DataContract(format!(
            "checkpoint predicts {} classes, data has {}",
            net.config().num_classes,
            split.num_classes
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let beliefs: Vec<BeliefMap> = split
            .samples
            .par_iter()
            .map(|s| predict_with(&net, &s.image_tensor()))
            .collect::<Result<_>>()?;
        let ece_value = calibration(split, &beliefs)?;
        methods
            .iter()
            .map(|&m| {
                score_method(split, &beliefs, m, thresholds, ece_value)
                    .map_err(|e| Error::Metric(format!("method {m}: {e}")))
            })
            .collect()
    })
}

fn calibration(split: &Split, beliefs: &[BeliefMap]) -> Result<f64> {
    let include: Vec<Vec<bool>> = split.samples.iter().map(|s| s.ood_mask.iter().map(|&o| !o).collect()).collect();
    let probs: Vec<&[f64]> = beliefs.iter().map(|b| b.probabilities.as_slice()).collect();
    let labels: Vec<&[u8]> = split.samples.iter().map(|s| s.labels.as_slice()).collect();
    let inc: Vec<&[bool]> = include.iter().map(Vec::as_slice).collect();
    ece(&probs, &labels, &inc, split.num_classes, DEFAULT_ECE_BINS)
}

fn score_method(
    split: &Split,
    beliefs: &[BeliefMap],
    method: ScoreMethod,
    thresholds: &[f64],
    ece_value: f64,
) -> Result<EvalReport> {
    let maps: Vec<Vec<f64>> = beliefs.par_iter().map(|b| method.score(b)).collect();

    let mut pixels = ScoredPixels::default();
    for (map, s) in maps.iter().zip(&split.samples) {
        for (&score, &ood) in map.iter().zip(&s.ood_mask) {
            pixels.push(score, ood, true);
        }
    }
    let curve = precision_recall_curve(&pixels)?;
    let inputs: Vec<SegmentInput<'_>> = maps
        .iter()
        .zip(&split.samples)
        .map(|(m, s)| SegmentInput {
            height: s.height,
            width: s.width,
            scores: m,
            gt: &s.ood_mask,
        })
        .collect();
    let seg = segment_level_metrics(&inputs, thresholds)?;
    Ok(EvalReport {
        method,
        auprc: auprc(&curve),
        fpr95: fpr_at_95_tpr(&pixels)?,
        mean_siou: seg.mean_siou,
        mean_ppv: seg.mean_ppv,
        mean_f1: seg.mean_f1,
        ece: ece_value,
        images: split.len(),
    })
}
