//! Evidential head: logits to evidence, evidence to Dirichlet concentrations,
//! and concentrations to expected class probabilities plus vacuity.
//!
//! For a pixel with evidence `e` over `C` classes the concentrations are
//! `alpha_i = e_i + 1`, the total evidence is `S = sum(alpha)`, the expected
//! probability is `p_i = alpha_i / S` and the vacuity is `U = C / S`.

mod special;

pub use special::{digamma, log_gamma, trigamma};
pub(crate) use special::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

use crate::error::{Error, Result};

/// Non-negative per-class evidence for one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceVector(Vec<f64>);

impl EvidenceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "evidence needs at least 2 classes, got {}",
                values.len()
            )));
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if v < 0.0 {
                return Err(Error::Domain {
                    name: "evidence",
                    value: v,
                });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

/// Dirichlet concentrations of one pixel together with their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    total: f64,
}

impl DirichletParams {
    /// Builds parameters directly from concentrations, each of which must be ≥ 1.
    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                alpha.len()
            )));
        }
        for (index, &a) in alpha.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if a < 1.0 {
                return Err(Error::Domain {
                    name: "concentration",
                    value: a,
                });
            }
        }
        let total = alpha.iter().sum();
        Ok(Self { alpha, total })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Total evidence `S`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }
}

/// Expected class probabilities and vacuity of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBelief {
    pub probabilities: Vec<f64>,
    pub uncertainty: f64,
}

impl PixelBelief {
    pub fn num_classes(&self) -> usize {
        self.probabilities.len()
    }
}

/// ReLU evidence. Rejects non-finite logits, naming the first offending index.
pub fn evidence_from_logits(logits: &[f64]) -> Result<EvidenceVector> {
    if let Some(index) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    EvidenceVector::new(logits.iter().map(|&l| relu(l)).collect())
}

pub fn dirichlet_from_evidence(evidence: &EvidenceVector) -> DirichletParams {
    let alpha: Vec<f64> = evidence.values().iter().map(|e| e + 1.0).collect();
    let total = alpha.iter().sum();
    DirichletParams { alpha, total }
}

pub fn belief(params: &DirichletParams) -> PixelBelief {
    let s = params.total;
    PixelBelief {
        probabilities: params.alpha.iter().map(|a| a / s).collect(),
        uncertainty: params.num_classes() as f64 / s,
    }
}

/// Logits straight to belief; convenience for callers that do not need the intermediates.
pub fn belief_from_logits(logits: &[f64]) -> Result<PixelBelief> {
    Ok(belief(&dirichlet_from_evidence(&evidence_from_logits(logits)?)))
}

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_evidence() {
        let e = evidence_from_logits(&[-1.0, 0.0, 2.5]).unwrap();
        assert_eq!(e.values(), &[0.0, 0.0, 2.5]);
        let e = evidence_from_logits(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.values(), &[0.0, 0.0, 0.0]);
        let e = evidence_from_logits(&[3.2, -7.1, 0.4]).unwrap();
        assert_eq!(e.values(), &[3.2, 0.0, 0.4]);
    }

    #[test]
    fn non_finite_logit_names_index() {
        let err = evidence_from_logits(&[0.0, 1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2 }));
        assert!(err.to_string().contains('2'));
        let err = evidence_from_logits(&[f64::INFINITY, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0 }));
    }

    #[test]
    fn evidence_vector_invariants() {
        assert!(EvidenceVector::new(vec![1.0]).is_err());
        assert!(EvidenceVector::new(vec![1.0, -0.1]).is_err());
        assert!(DirichletParams::from_alpha(vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn concentrations() {
        let cases: [([f64; 3], [f64; 3], f64); 3] = [
            ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 3.0),
            ([4.0, 0.0, 0.0], [5.0, 1.0, 1.0], 7.0),
            ([1.0, 2.0, 3.0], [2.0, 3.0, 4.0], 9.0),
        ];
        for (e, alpha, total) in cases {
            let p = dirichlet_from_evidence(&EvidenceVector::new(e.to_vec()).unwrap());
            assert_eq!(p.alpha(), &alpha);
            assert_eq!(p.total(), total);
        }
    }

    #[test]
    fn beliefs() {
        let b = belief(&DirichletParams::from_alpha(vec![1.0, 1.0, 1.0]).unwrap());
        assert_eq!(b.uncertainty, 1.0);
        for p in &b.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let b = belief(&DirichletParams::from_alpha(vec![5.0, 1.0, 1.0]).unwrap());
        assert_eq!(b.probabilities, vec![5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0]);
        assert_eq!(b.uncertainty, 3.0 / 7.0);
        let b = belief(&DirichletParams::from_alpha(vec![2.0, 3.0, 4.0]).unwrap());
        assert_eq!(b.probabilities, vec![2.0 / 9.0, 3.0 / 9.0, 4.0 / 9.0]);
        assert!((b.uncertainty - 1.0 / 3.0).abs() < 1e-15);
    }

    fn logits_strategy() -> impl Strategy<Value = Vec<f64>> {
        (2usize..8).prop_flat_map(|c| prop::collection::vec(-50.0f64..50.0, c))
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(logits in logits_strategy()) {
            let b = belief_from_logits(&logits).unwrap();
            let sum: f64 = b.probabilities.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(b.uncertainty > 0.0 && b.uncertainty <= 1.0);
        }

        #[test]
        fn uncertainty_decreases_with_evidence(
            logits in logits_strategy(),
            pick in 0usize..8,
            bump in 1e-3f64..10.0,
        ) {
            let i = pick % logits.len();
            let e = evidence_from_logits(&logits).unwrap();
            let mut more = e.values().to_vec();
            more[i] += bump;
            let before = belief(&dirichlet_from_evidence(&e)).uncertainty;
            let after = belief(&dirichlet_from_evidence(&EvidenceVector::new(more).unwrap())).uncertainty;
            prop_assert!(after < before);
        }

        #[test]
        fn argmax_preserved_for_positive_max(logits in logits_strategy()) {
            let (imax, &lmax) = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            prop_assume!(lmax > 0.0);
            prop_assume!(logits.iter().filter(|&&l| l == lmax).count() == 1);
            let b = belief_from_logits(&logits).unwrap();
            let pmax = b
                .probabilities
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            prop_assert_eq!(pmax, imax);
        }

        #[test]
        fn digamma_recurrence(x in 0.01f64..100.0) {
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            prop_assert!((lhs - 1.0 / x).abs() < 1e-8);
        }

        #[test]
        fn log_gamma_recurrence(x in 0.01f64..100.0) {
            let ratio = (log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap()).exp();
            prop_assert!(((ratio - x) / x).abs() < 1e-8);
        }
    }
}
