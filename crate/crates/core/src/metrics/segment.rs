//! Component-level OOD metrics: adjusted IoU per ground-truth segment,
//! positive predictive value per predicted segment and segment F1.
//!
//! For every score threshold the score map is binarised (`score >= t`) and
//! both masks are split into 8-connected components, image by image. For a
//! ground-truth segment `k`, let `P(k)` be the union of predicted components
//! touching it; then
//!
//! `sIoU(k) = |k ∩ P(k)| / (|k ∪ P(k)| - |P(k) ∩ other gt segments|)`.
//!
//! A predicted component `j` has `PPV(j) = |j ∩ gt| / |j|`. Segments with
//! `sIoU >= 0.25` are true positives, predicted components with
//! `PPV < 0.25` are false positives.

use super::components::connected_components;
use crate::error::{Error, Result};

pub const SIOU_TP_CUTOFF: f64 = 0.25;
pub const PPV_FP_CUTOFF: f64 = 0.25;

/// 0.25, 0.30, ..., 0.75.
pub fn default_thresholds() -> Vec<f64> {
    (0..=10).map(|k| (25.0 + 5.0 * k as f64) / 100.0).collect()
}

/// One image's OOD scores and ground-truth OOD mask, row-major.
#[derive(Debug, Clone, Copy)]
pub struct SegmentInput<'a> {
    pub height: usize,
    pub width: usize,
    pub scores: &'a [f64],
    pub gt: &'a [bool],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub mean_siou: f64,
    /// `None` when nothing was predicted at this threshold.
    pub mean_ppv: Option<f64>,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatchReport {
    pub mean_siou: f64,
    pub mean_ppv: f64,
    pub mean_f1: f64,
    pub rows: Vec<ThresholdRow>,
}

#[derive(Default)]
struct Tally {
    siou_sum: f64,
    gt_segments: usize,
    ppv_sum: f64,
    pred_segments: usize,
    tp: usize,
    fp: usize,
}

fn tally_image(img: &SegmentInput<'_>, threshold: f64, t: &mut Tally) {
    let pred: Vec<bool> = img.scores.iter().map(|&s| s >= threshold).collect();
    let (gt_lab, n_gt) = connected_components(img.gt, img.height, img.width);
    let (pred_lab, n_pred) = connected_components(&pred, img.height, img.width);

    let mut gt_size = vec![0usize; n_gt + 1];
    let mut pred_size = vec![0usize; n_pred + 1];
    let mut pred_on_gt = vec![0usize; n_pred + 1];
    // overlap counts between gt segment k and predicted component j
    let mut pairs: Vec<(u32, u32, usize)> = Vec::new();
    for (&g, &p) in gt_lab.iter().zip(&pred_lab) {
        gt_size[g as usize] += 1;
        pred_size[p as usize] += 1;
        if g > 0 && p > 0 {
            pred_on_gt[p as usize] += 1;
            match pairs.iter_mut().find(|(a, b, _)| *a == g && *b == p) {
                Some(e) => e.2 += 1,
                None => pairs.push((g, p, 1)),
            }
        }
    }

    for k in 1..=n_gt as u32 {
        let touching: Vec<(u32, usize)> = pairs
            .iter()
            .filter(|(g, _, _)| *g == k)
            .map(|&(_, p, n)| (p, n))
            .collect();
        let inter: usize = touching.iter().map(|(_, n)| n).sum();
        let union_pred: usize = touching.iter().map(|(p, _)| pred_size[*p as usize]).sum();
        // predicted pixels of P(k) lying on other gt segments
        let adjustment: usize = touching.iter().map(|(p, n)| pred_on_gt[*p as usize] - n).sum();
        let union = gt_size[k as usize] + union_pred - inter;
        let siou = inter as f64 / (union - adjustment) as f64;
        t.siou_sum += siou;
        t.gt_segments += 1;
        if siou >= SIOU_TP_CUTOFF {
            t.tp += 1;
        }
    }
    for j in 1..=n_pred {
        let ppv = pred_on_gt[j] as f64 / pred_size[j] as f64;
        t.ppv_sum += ppv;
        t.pred_segments += 1;
        if ppv < PPV_FP_CUTOFF {
            t.fp += 1;
        }
    }
}

/// Segment metrics averaged over `thresholds`.
///
/// PPV is averaged over the thresholds that produced at least one predicted
/// component and is 0 when none did.
pub fn segment_level_metrics(images: &[SegmentInput<'_>], thresholds: &[f64]) -> Result<SegmentMatchReport> {
    if thresholds.is_empty() {
        return Err(Error::Metric("segment metrics need at least one threshold".into()));
    }
    for (i, img) in images.iter().enumerate() {
        let n = img.height * img.width;
        if img.scores.len() != n || img.gt.len() != n {
            return Err(Error::Metric(format!("image {i}: score or mask size differs from {n}")));
        }
    }

    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut t = Tally::default();
        for img in images {
            tally_image(img, threshold, &mut t);
        }
        if t.gt_segments == 0 {
            return Err(Error::Metric("no ground-truth OOD segment in the evaluation set".into()));
        }
        let fn_ = t.gt_segments - t.tp;
        rows.push(ThresholdRow {
            threshold,
            mean_siou: t.siou_sum / t.gt_segments as f64,
            mean_ppv: (t.pred_segments > 0).then(|| t.ppv_sum / t.pred_segments as f64),
            f1: 2.0 * t.tp as f64 / (2 * t.tp + fn_ + t.fp) as f64,
            true_positives: t.tp,
            false_positives: t.fp,
            false_negatives: fn_,
        });
    }

    let n = rows.len() as f64;
    let ppvs: Vec<f64> = rows.iter().filter_map(|r| r.mean_ppv).collect();
    Ok(SegmentMatchReport {
        mean_siou: rows.iter().map(|r| r.mean_siou).sum::<f64>() / n,
        mean_ppv: if ppvs.is_empty() {
            0.0
        } else {
            ppvs.iter().sum::<f64>() / ppvs.len() as f64
        },
        mean_f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
        rows,
    })
}
