//! Randomised comparison of the analytic loss gradient against central
//! finite differences.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnealSchedule, EvidentialLoss, LossWeights};
use crate::error::Result;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
/// Coordinates with a smaller analytic gradient are not compared.
pub const MIN_MAGNITUDE: f64 = 1e-8;
/// Coordinates this close to the ReLU kink are not compared.
pub const KINK_MARGIN: f64 = 1e-4;

/// Signature of the gradient under test.
pub type GradientFn<'a> = dyn Fn(&EvidentialLoss, &Tensor, &[u8], u64) -> Result<Tensor> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Wasserstein,
    Dice,
    Kl,
    Mse,
    Total,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Wasserstein, Term::Dice, Term::Kl, Term::Mse, Term::Total];

    pub fn name(self) -> &'static str {
        match self {
            Term::Wasserstein => "wasserstein",
            Term::Dice => "dice",
            Term::Kl => "kl",
            Term::Mse => "mse",
            Term::Total => "total",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TermResult {
    pub term: Term,
    pub max_rel_error: f64,
    pub coordinates_checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub trials: usize,
    pub terms: Vec<TermResult>,
    /// Description of the first configuration exceeding the tolerance.
    pub first_failure: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.terms.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gradient check: {} trials, tolerance {TOLERANCE:e}", self.trials)?;
        for t in &self.terms {
            let verdict = if t.max_rel_error <= TOLERANCE { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<12} max_rel_error={:.3e} coords={} {verdict}",
                t.term.name(),
                t.max_rel_error,
                t.coordinates_checked
            )?;
        }
        match &self.first_failure {
            None => write!(f, "result: PASS"),
            Some(cfg) => write!(f, "result: FAIL\nfailing configuration: {cfg}"),
        }
    }
}

/// Checks the crate's analytic gradient.
pub fn run(trials: usize, seed: u64) -> Result<GradCheckReport> {
    run_with(trials, seed, &|loss, logits, labels, it| loss.gradient(logits, labels, it))
}

/// Checks an arbitrary gradient implementation against finite differences of
/// [`EvidentialLoss::evaluate`].
pub fn run_with(trials: usize, seed: u64, gradient: &GradientFn<'_>) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<TermResult> = Term::ALL
        .iter()
        .map(|&term| TermResult {
            term,
            max_rel_error: 0.0,
            coordinates_checked: 0,
        })
        .collect();
    let mut first_failure = None;

    for trial in 0..trials {
        let case = Case::draw(&mut rng, trial);
        for (slot, &term) in Term::ALL.iter().enumerate() {
            let (loss, iteration) = case.loss_for(term)?;
            let (worst, checked) = compare(&loss, &case, iteration, gradient)?;
            let r = &mut results[slot];
            r.max_rel_error = r.max_rel_error.max(worst);
            r.coordinates_checked += checked;
            if worst > TOLERANCE && first_failure.is_none() {
                first_failure = Some(format!(
                    "trial={trial} term={} rel_error={worst:.3e} {case} weights={:?} prior={}",
                    term.name(),
                    loss.weights,
                    loss.prior_concentration
                ));
            }
        }
    }

    Ok(GradCheckReport {
        trials,
        terms: results,
        first_failure,
    })
}

fn compare(
    loss: &EvidentialLoss,
    case: &Case,
    iteration: u64,
    gradient: &GradientFn<'_>,
) -> Result<(f64, usize)> {
    let analytic = gradient(loss, &case.logits, &case.labels, iteration)?;
    let mut probe = case.logits.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..probe.len() {
        let x = case.logits.data()[i];
        let a = analytic.data()[i];
        if x.abs() < KINK_MARGIN || a.abs() <= MIN_MAGNITUDE {
            continue;
        }
        probe.data_mut()[i] = x + FD_STEP;
        let up = loss.evaluate(&probe, &case.labels, iteration)?.total;
        probe.data_mut()[i] = x - FD_STEP;
        let down = loss.evaluate(&probe, &case.labels, iteration)?.total;
        probe.data_mut()[i] = x;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        worst = worst.max(rel);
        checked += 1;
    }
    Ok((worst, checked))
}

struct Case {
    logits: Tensor,
    labels: Vec<u8>,
    weights: LossWeights,
    schedule: AnnealSchedule,
    iteration: u64,
    prior: f64,
}

impl Case {
    fn draw(rng: &mut ChaCha8Rng, trial: usize) -> Self {
        let c = rng.random_range(2..=5usize);
        let n = rng.random_range(1..=2usize);
        let h = rng.random_range(1..=3usize);
        let w = rng.random_range(1..=3usize);
        let data = (0..n * c * h * w)
            .map(|_| loop {
                let v: f64 = rng.random_range(-2.0..2.5);
                if v.abs() >= 1e-3 {
                    break v;
                }
            })
            .collect();
        let logits = Tensor::new(vec![n, c, h, w], data).expect("shape matches data");
        let labels = (0..n * h * w).map(|_| rng.random_range(0..c) as u8).collect();
        let weights = if trial % 4 == 0 {
            LossWeights::composite_default()
        } else {
            LossWeights {
                w_wasserstein: rng.random_range(0.0..1.0),
                w_dice: rng.random_range(0.0..1.0),
                w_kl: rng.random_range(0.05..1.0),
                w_mse: rng.random_range(0.0..1.0),
            }
        };
        let ramp_start = rng.random_range(0..50u64);
        let schedule = AnnealSchedule {
            ramp_start,
            ramp_end: ramp_start + rng.random_range(1..100u64),
            plateau: weights.w_kl,
        };
        let iteration = rng.random_range(0..200u64);
        let prior = if rng.random_bool(0.5) { 1.0 } else { 0.25 };
        Self {
            logits,
            labels,
            weights,
            schedule,
            iteration,
            prior,
        }
    }

    /// Single terms are checked with unit weight; `Total` uses the drawn mix.
    fn loss_for(&self, term: Term) -> Result<(EvidentialLoss, u64)> {
        let one = |w, d, k, m| LossWeights::new(w, d, k, m);
        let always_on = AnnealSchedule::new(0, 1, 1.0)?;
        let (weights, schedule) = match term {
            Term::Wasserstein => (one(1.0, 0.0, 0.0, 0.0)?, always_on),
            Term::Dice => (one(0.0, 1.0, 0.0, 0.0)?, always_on),
            Term::Kl => (one(0.0, 0.0, 1.0, 0.0)?, always_on),
            Term::Mse => (one(0.0, 0.0, 0.0, 1.0)?, always_on),
            Term::Total => (self.weights, self.schedule),
        };
        let iteration = if term == Term::Total { self.iteration } else { 1 };
        Ok((EvidentialLoss::new(weights, schedule, self.prior)?, iteration))
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "shape={:?} iteration={} labels={:?} logits={:?}",
            self.logits.shape(),
            self.iteration,
            self.labels,
            self.logits.data()
        )
    }
}
