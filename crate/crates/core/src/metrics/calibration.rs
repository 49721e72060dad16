use crate::error::{Error, Result};

pub const DEFAULT_ECE_BINS: usize = 15;

/// Equal-width binned calibration error over `(confidence, correct)` pairs.
pub fn ece_from_pixels(confidence: &[f64], correct: &[bool], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::Metric("ECE needs at least one bin".into()));
    }
    if confidence.len() != correct.len() {
        return Err(Error::Metric("confidence and correctness lengths differ".into()));
    }
    if confidence.is_empty() {
        return Err(Error::Metric("ECE over zero pixels".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for (&c, &ok) in confidence.iter().zip(correct) {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Metric(format!("confidence {c} outside [0, 1]")));
        }
        let b = ((c * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += ok as usize;
    }
    let n = confidence.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            (m / n) * (hits[b] as f64 / m - conf_sum[b] / m).abs()
        })
        .sum())
}

/// ECE of `[C, H, W]` probability maps against labels, restricted to pixels
/// where `include` is set.
pub fn ece(
    probability_maps: &[&[f64]],
    label_maps: &[&[u8]],
    include: &[&[bool]],
    num_classes: usize,
    bins: usize,
) -> Result<f64> {
    let mut conf = Vec::new();
    let mut correct = Vec::new();
    for ((probs, labels), keep) in probability_maps.iter().zip(label_maps).zip(include) {
        let hw = labels.len();
        if probs.len() != num_classes * hw || keep.len() != hw {
            return Err(Error::Metric("probability, label and mask sizes disagree".into()));
        }
        for px in 0..hw {
            if !keep[px] {
                continue;
            }
            let mut best = 0;
            for k in 1..num_classes {
                if probs[k * hw + px] > probs[best * hw + px] {
                    best = k;
                }
            }
            conf.push(probs[best * hw + px]);
            correct.push(best == labels[px] as usize);
        }
    }
    ece_from_pixels(&conf, &correct, bins)
}
