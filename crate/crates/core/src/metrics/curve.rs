//! Pixel-level precision-recall curve, AuPRC and FPR at 95% TPR.
//!
//! OOD pixels are the positive class and higher scores mean "more OOD".
//! Pixels sharing a score cross every threshold together.

use crate::error::{Error, Result};

/// Flat per-pixel scores with OOD labels and an inclusion mask.
#[derive(Debug, Clone, Default)]
pub struct ScoredPixels {
    pub scores: Vec<f64>,
    pub is_ood: Vec<bool>,
    pub valid: Vec<bool>,
}

impl ScoredPixels {
    /// All pixels valid.
    pub fn new(scores: Vec<f64>, is_ood: Vec<bool>) -> Self {
        let valid = vec![true; scores.len()];
        Self { scores, is_ood, valid }
    }

    pub fn push(&mut self, score: f64, is_ood: bool, valid: bool) {
        self.scores.push(score);
        self.is_ood.push(is_ood);
        self.valid.push(valid);
    }

    /// Valid pixels in descending score order (pixel index breaks ties) plus
    /// the positive and negative counts.
    fn ranked(&self) -> Result<(Vec<usize>, usize, usize)> {
        if self.scores.len() != self.is_ood.len() || self.scores.len() != self.valid.len() {
            return Err(Error::Metric(format!(
                "scored pixel arrays differ in length: {}, {}, {}",
                self.scores.len(),
                self.is_ood.len(),
                self.valid.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.scores.len()).filter(|&i| self.valid[i]).collect();
        if let Some(&i) = order.iter().find(|&&i| !self.scores[i].is_finite()) {
            return Err(Error::Metric(format!("non-finite score at pixel {i}")));
        }
        let pos = order.iter().filter(|&&i| self.is_ood[i]).count();
        let neg = order.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::Metric(format!(
                "curve metrics need both classes among valid pixels ({pos} positive, {neg} negative)"
            )));
        }
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        Ok((order, pos, neg))
    }

    /// Cumulative `(threshold, tp, fp)` after each tie group, thresholds descending.
    fn operating_points(&self) -> Result<(Vec<(f64, usize, usize)>, usize, usize)> {
        let (order, pos, neg) = self.ranked()?;
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        let mut k = 0;
        while k < order.len() {
            let s = self.scores[order[k]];
            while k < order.len() && self.scores[order[k]] == s {
                if self.is_ood[order[k]] {
                    tp += 1;
                } else {
                    fp += 1;
                }
                k += 1;
            }
            points.push((s, tp, fp));
        }
        Ok((points, pos, neg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per distinct score, thresholds descending.
pub fn precision_recall_curve(data: &ScoredPixels) -> Result<Vec<CurvePoint>> {
    let (points, pos, _) = data.operating_points()?;
    Ok(points
        .into_iter()
        .map(|(threshold, tp, fp)| CurvePoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / pos as f64,
        })
        .collect())
}

/// Step-wise area: `sum (r_k - r_{k-1}) * p_k` with `r_0 = 0`.
pub fn auprc(curve: &[CurvePoint]) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for pt in curve {
        area += (pt.recall - prev) * pt.precision;
        prev = pt.recall;
    }
    area
}

/// False-positive rate at the largest threshold whose TPR reaches 95%.
pub fn fpr_at_95_tpr(data: &ScoredPixels) -> Result<f64> {
    let (points, pos, neg) = data.operating_points()?;
    let (_, _, fp) = points
        .into_iter()
        .find(|&(_, tp, _)| tp * 100 >= pos * 95)
        .expect("the last operating point has full recall");
    Ok(fp as f64 / neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(scores: &[f64], labels: &[u8]) -> ScoredPixels {
        ScoredPixels::new(scores.to_vec(), labels.iter().map(|&l| l == 1).collect())
    }

    #[test]
    fn three_point_curve() {
        let c = precision_recall_curve(&scored(&[0.9, 0.8, 0.1], &[1, 1, 0])).unwrap();
        let want = [(0.9, 1.0, 0.5), (0.8, 1.0, 1.0), (0.1, 2.0 / 3.0, 1.0)];
        assert_eq!(c.len(), 3);
        for (p, (t, pr, r)) in c.iter().zip(want) {
            assert_eq!((p.threshold, p.precision, p.recall), (t, pr, r));
        }
        assert_eq!(auprc(&c), 1.0);
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let d = scored(&[0.3; 8], &[1, 0, 0, 1, 0, 0, 0, 0]);
        let c = precision_recall_curve(&d).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].precision, 0.25);
        assert_eq!(auprc(&c), 0.25);
        assert_eq!(fpr_at_95_tpr(&d).unwrap(), 1.0);
    }

    #[test]
    fn perfect_separation() {
        let d = scored(&[0.9, 0.7, 0.2, 0.1], &[1, 1, 0, 0]);
        let c = precision_recall_curve(&d).unwrap();
        assert!(c.iter().any(|p| p.precision == 1.0 && p.recall == 1.0));
        assert_eq!(auprc(&c), 1.0);
        assert_eq!(fpr_at_95_tpr(&d).unwrap(), 0.0);
    }

    #[test]
    fn fpr95_interleaved_negatives() {
        // 20 positives; 4 negatives rank between the 18th and 19th positive
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..18 {
            scores.push(200.0 - i as f64);
            labels.push(1);
        }
        for i in 0..4 {
            scores.push(150.0 - i as f64);
            labels.push(0);
        }
        scores.extend([120.0, 119.0]);
        labels.extend([1, 1]);
        for i in 0..76 {
            scores.push(50.0 - i as f64 * 0.5);
            labels.push(0);
        }
        assert_eq!(fpr_at_95_tpr(&scored(&scores, &labels)).unwrap(), 0.05);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(precision_recall_curve(&scored(&[0.1, 0.2], &[1, 1])).is_err());
        assert!(fpr_at_95_tpr(&scored(&[0.1, 0.2], &[0, 0])).is_err());
        let mut d = scored(&[0.1, 0.2, 0.3], &[1, 0, 0]);
        d.valid[0] = false;
        assert!(fpr_at_95_tpr(&d).is_err());
        let d = ScoredPixels {
            scores: vec![0.1],
            is_ood: vec![true, false],
            valid: vec![true],
        };
        assert!(precision_recall_curve(&d).is_err());
    }

    #[test]
    fn invalid_pixels_excluded() {
        let mut d = scored(&[0.9, 0.95, 0.1], &[1, 0, 0]);
        d.valid[1] = false;
        assert_eq!(auprc(&precision_recall_curve(&d).unwrap()), 1.0);
    }
}
