use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::nn::BeliefMap;

/// Per-pixel OOD score; higher means more likely out-of-distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreMethod {
    Uncertainty,
    MaxSoftmax,
    Entropy,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 3] = [ScoreMethod::Uncertainty, ScoreMethod::MaxSoftmax, ScoreMethod::Entropy];

    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Uncertainty => "uncertainty",
            ScoreMethod::MaxSoftmax => "max_softmax",
            ScoreMethod::Entropy => "entropy",
        }
    }

    /// Score map over `H*W` pixels.
    pub fn score(self, belief: &BeliefMap) -> Vec<f64> {
        match self {
            ScoreMethod::Uncertainty => belief.uncertainty.clone(),
            ScoreMethod::MaxSoftmax => per_pixel(belief, max_softmax_score),
            ScoreMethod::Entropy => per_pixel(belief, entropy_score),
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ScoreMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = ScoreMethod::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method `{s}` (valid: {})", valid.join(", ")))
            })
    }
}

fn per_pixel(belief: &BeliefMap, f: fn(&[f64]) -> f64) -> Vec<f64> {
    let hw = belief.height * belief.width;
    let mut p = vec![0.0; belief.num_classes];
    (0..hw)
        .map(|px| {
            for (k, slot) in p.iter_mut().enumerate() {
                *slot = belief.probabilities[k * hw + px];
            }
            f(&p)
        })
        .collect()
}

pub fn max_softmax_score(p: &[f64]) -> f64 {
    1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `-sum p ln p`, with `0 ln 0 = 0`.
pub fn entropy_score(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn baseline_examples() {
        let third = [1.0 / 3.0; 3];
        assert!((max_softmax_score(&third) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(max_softmax_score(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(max_softmax_score(&[0.5, 0.3, 0.2]), 0.5);
        assert!((entropy_score(&third) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(entropy_score(&[0.0, 1.0, 0.0]), 0.0);
        assert!((entropy_score(&[0.5, 0.5, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_from_logits() {
        // pixel 0 vacuous, pixel 1 alpha = (5, 1, 1)
        let logits = Tensor::new(vec![1, 3, 1, 2], vec![0.0, 4.0, -1.0, 0.0, 0.0, -3.0]).unwrap();
        let b = BeliefMap::from_logits(&logits).unwrap();
        let u = ScoreMethod::Uncertainty.score(&b);
        assert_eq!(u[0], 1.0);
        assert!((u[1] - 3.0 / 7.0).abs() < 1e-15);
        let ms = ScoreMethod::MaxSoftmax.score(&b);
        assert!((ms[1] - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn parse_names() {
        for m in ScoreMethod::ALL {
            assert_eq!(m.name().parse::<ScoreMethod>().unwrap(), m);
        }
        let err = "softmax".parse::<ScoreMethod>().unwrap_err().to_string();
        assert!(err.contains("uncertainty, max_softmax, entropy"), "{err}");
    }
}
