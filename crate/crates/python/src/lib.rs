//! Python bindings. Arrays cross the boundary as flat lists plus a shape.

use std::path::PathBuf;

use edlseg::data::{generate_dataset as generate, read_split, DatasetConfig, EVAL_FILE};
use edlseg::dirichlet::{belief_from_logits as belief, DirichletParams};
use edlseg::losses::{self, gradcheck, AnnealSchedule, EvidentialLoss};
use edlseg::metrics::{self, ScoreMethod, ScoredPixels, SegmentInput};
use edlseg::nn::{self, SegNetConfig};
use edlseg::tensor::Tensor;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: edlseg::Error) -> PyErr {
    match e {
        edlseg::Error::Io(_) | edlseg::Error::Format { .. } | edlseg::Error::Version { .. } => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(module = "edlseg_py", from_py_object)]
#[derive(Clone, Copy)]
struct LossWeights {
    inner: losses::LossWeights,
}

#[pymethods]
impl LossWeights {
    #[new]
    #[pyo3(signature = (w_wasserstein, w_dice, w_kl, w_mse))]
    fn new(w_wasserstein: f64, w_dice: f64, w_kl: f64, w_mse: f64) -> PyResult<Self> {
        let inner = losses::LossWeights::new(w_wasserstein, w_dice, w_kl, w_mse).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn composite_default() -> Self {
        Self {
            inner: losses::LossWeights::composite_default(),
        }
    }

    #[staticmethod]
    fn mse_only() -> Self {
        Self {
            inner: losses::LossWeights::mse_only(),
        }
    }

    #[getter]
    fn w_wasserstein(&self) -> f64 {
        self.inner.w_wasserstein
    }
    #[getter]
    fn w_dice(&self) -> f64 {
        self.inner.w_dice
    }
    #[getter]
    fn w_kl(&self) -> f64 {
        self.inner.w_kl
    }
    #[getter]
    fn w_mse(&self) -> f64 {
        self.inner.w_mse
    }

    fn __repr__(&self) -> String {
        let w = &self.inner;
        format!(
            "LossWeights(w_wasserstein={}, w_dice={}, w_kl={}, w_mse={})",
            w.w_wasserstein, w.w_dice, w.w_kl, w.w_mse
        )
    }
}

#[pyclass(module = "edlseg_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct LossBreakdown {
    total: f64,
    wasserstein: f64,
    dice: f64,
    kl: f64,
    mse: f64,
    kl_weight_used: f64,
}

#[pymethods]
impl LossBreakdown {
    fn __repr__(&self) -> String {
        format!(
            "LossBreakdown(total={}, wasserstein={}, dice={}, kl={}, mse={}, kl_weight_used={})",
            self.total, self.wasserstein, self.dice, self.kl, self.mse, self.kl_weight_used
        )
    }
}

/// `(probabilities, uncertainty)` of one pixel's logits.
#[pyfunction]
fn belief_from_logits(logits: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let b = belief(&logits).map_err(err)?;
    Ok((b.probabilities, b.uncertainty))
}

#[pyfunction]
#[pyo3(signature = (alpha, prior_concentration = 1.0))]
fn kl_to_prior(alpha: Vec<f64>, prior_concentration: f64) -> PyResult<f64> {
    let p = DirichletParams::from_alpha(alpha).map_err(err)?;
    losses::kl_to_prior_pixel(&p, prior_concentration).map_err(err)
}

#[pyfunction]
fn kl_weight(iteration: u64, ramp_start: u64, ramp_end: u64, plateau: f64) -> PyResult<f64> {
    let s = AnnealSchedule::new(ramp_start, ramp_end, plateau).map_err(err)?;
    Ok(losses::kl_weight(iteration, &s))
}

fn loss_fn(weights: &LossWeights, ramp: (u64, u64), a0: f64) -> PyResult<EvidentialLoss> {
    let schedule = AnnealSchedule::new(ramp.0, ramp.1, weights.inner.w_kl).map_err(err)?;
    EvidentialLoss::new(weights.inner, schedule, a0).map_err(err)
}

/// Composite loss of `[N, C, H, W]` logits (flat) against `[N, H, W]` labels.
/// Returns the breakdown and the gradient with respect to the logits.
#[pyfunction]
#[pyo3(signature = (logits, shape, labels, weights, iteration, ramp = (0, 1), prior_concentration = 1.0))]
fn total_loss(
    logits: Vec<f64>,
    shape: Vec<usize>,
    labels: Vec<u8>,
    weights: LossWeights,
    iteration: u64,
    ramp: (u64, u64),
    prior_concentration: f64,
) -> PyResult<(LossBreakdown, Vec<f64>)> {
    let loss = loss_fn(&weights, ramp, prior_concentration)?;
    let t = Tensor::new(shape, logits).map_err(err)?;
    let (b, g) = loss.evaluate_with_gradient(&t, &labels, iteration).map_err(err)?;
    let breakdown = LossBreakdown {
        total: b.total,
        wasserstein: b.wasserstein,
        dice: b.dice,
        kl: b.kl,
        mse: b.mse,
        kl_weight_used: b.kl_weight_used,
    };
    Ok((breakdown, g.into_data()))
}

/// `(passed, max_relative_error, report_text)`.
#[pyfunction]
#[pyo3(signature = (trials = 200, seed = 0))]
fn grad_check(trials: usize, seed: u64) -> PyResult<(bool, f64, String)> {
    let r = gradcheck::run(trials, seed).map_err(err)?;
    Ok((r.passed(), r.max_rel_error(), r.to_string()))
}

/// Writes `train.edsd` and `eval.edsd` to `out_dir`; returns `(num_train, num_eval)`.
#[pyfunction]
#[pyo3(signature = (
    out_dir, height = 64, width = 64, num_train = 256, num_eval = 50, noise_std = 0.05,
    radius = (4, 9), shapes = (1, 3), seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    out_dir: PathBuf,
    height: usize,
    width: usize,
    num_train: usize,
    num_eval: usize,
    noise_std: f64,
    radius: (usize, usize),
    shapes: (usize, usize),
    seed: u64,
) -> PyResult<(usize, usize)> {
    let cfg = DatasetConfig {
        height,
        width,
        num_train,
        num_eval,
        noise_std,
        min_radius: radius.0,
        max_radius: radius.1,
        min_shapes: shapes.0,
        max_shapes: shapes.1,
        seed,
        ..DatasetConfig::default()
    };
    let ds = generate(&cfg).map_err(err)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    ds.save(&out_dir).map_err(err)?;
    Ok((ds.train.len(), ds.eval.len()))
}

#[pyclass(module = "edlseg_py", skip_from_py_object)]
struct Checkpoint {
    inner: nn::Checkpoint,
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: nn::Checkpoint::load(&path).map_err(err)?,
        })
    }

    /// All-zero parameters: every pixel is vacuous.
    #[staticmethod]
    #[pyo3(signature = (num_classes = 4, hidden_channels = 16, depth = 3, kernel_size = 3))]
    fn zeros(num_classes: usize, hidden_channels: usize, depth: usize, kernel_size: usize) -> PyResult<Self> {
        let cfg = SegNetConfig {
            in_channels: 3,
            hidden_channels,
            depth,
            num_classes,
            kernel_size,
        };
        Ok(Self {
            inner: nn::Checkpoint::zeros(cfg).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.config.num_classes
    }

    /// `[3, H, W]` image in [0, 1] (flat) -> (`[C, H, W]` probabilities, `[H, W]` uncertainty).
    fn predict(&self, image: Vec<f64>, height: usize, width: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let t = Tensor::new(vec![3, height, width], image).map_err(err)?;
        let b = nn::predict(&self.inner, &t).map_err(err)?;
        Ok((b.probabilities, b.uncertainty))
    }

    /// Metric rows for `<data_dir>/eval.edsd`, one dict per method.
    #[pyo3(signature = (data_dir, methods = vec!["uncertainty".to_owned()], workers = 1))]
    fn evaluate(
        &self,
        py: Python<'_>,
        data_dir: PathBuf,
        methods: Vec<String>,
        workers: usize,
    ) -> PyResult<Vec<Py<pyo3::types::PyDict>>> {
        let split = read_split(&data_dir.join(EVAL_FILE)).map_err(err)?;
        let methods = methods
            .iter()
            .map(|m| m.parse::<ScoreMethod>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let reports = metrics::evaluate(&self.inner, &split, &methods, &metrics::default_thresholds(), workers)
            .map_err(err)?;
        reports
            .iter()
            .map(|r| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("method", r.method.name())?;
                d.set_item("auprc", r.auprc)?;
                d.set_item("fpr95", r.fpr95)?;
                d.set_item("siou", r.mean_siou)?;
                d.set_item("ppv", r.mean_ppv)?;
                d.set_item("f1", r.mean_f1)?;
                d.set_item("ece", r.ece)?;
                d.set_item("images", r.images)?;
                Ok(d.unbind())
            })
            .collect()
    }
}

fn scored(scores: Vec<f64>, is_ood: Vec<bool>) -> PyResult<ScoredPixels> {
    if scores.len() != is_ood.len() {
        return Err(PyValueError::new_err("scores and is_ood differ in length"));
    }
    Ok(ScoredPixels::new(scores, is_ood))
}

#[pyfunction]
fn auprc(scores: Vec<f64>, is_ood: Vec<bool>) -> PyResult<f64> {
    let data = scored(scores, is_ood)?;
    Ok(metrics::auprc(&metrics::precision_recall_curve(&data).map_err(err)?))
}

#[pyfunction]
fn fpr_at_95_tpr(scores: Vec<f64>, is_ood: Vec<bool>) -> PyResult<f64> {
    metrics::fpr_at_95_tpr(&scored(scores, is_ood)?).map_err(err)
}

/// `(mean_siou, mean_ppv, mean_f1)` for one `H x W` score map and mask.
#[pyfunction]
#[pyo3(signature = (scores, gt, height, width, thresholds = None))]
fn segment_metrics(
    scores: Vec<f64>,
    gt: Vec<bool>,
    height: usize,
    width: usize,
    thresholds: Option<Vec<f64>>,
) -> PyResult<(f64, f64, f64)> {
    let input = SegmentInput {
        height,
        width,
        scores: &scores,
        gt: &gt,
    };
    let thresholds = thresholds.unwrap_or_else(metrics::default_thresholds);
    let r = metrics::segment_level_metrics(&[input], &thresholds).map_err(err)?;
    Ok((r.mean_siou, r.mean_ppv, r.mean_f1))
}

#[pyfunction]
#[pyo3(signature = (confidence, correct, bins = 15))]
fn ece(confidence: Vec<f64>, correct: Vec<bool>, bins: usize) -> PyResult<f64> {
    metrics::ece_from_pixels(&confidence, &correct, bins).map_err(err)
}

#[pymodule]
fn edlseg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LossWeights>()?;
    m.add_class::<LossBreakdown>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(belief_from_logits, m)?)?;
    m.add_function(wrap_pyfunction!(kl_to_prior, m)?)?;
    m.add_function(wrap_pyfunction!(kl_weight, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    m.add_function(wrap_pyfunction!(fpr_at_95_tpr, m)?)?;
    m.add_function(wrap_pyfunction!(segment_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(ece, m)?)?;
    Ok(())
}
