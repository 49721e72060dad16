//! OOD evaluation: pixel-level PR metrics, segment-level matching,
//! calibration and heatmap export.

mod calibration;
mod components;
mod curve;
mod evaluate;
mod pgm;
mod scores;
mod segment;

pub use calibration::{ece, ece_from_pixels, DEFAULT_ECE_BINS};
pub use components::connected_components;
pub use curve::{auprc, fpr_at_95_tpr, precision_recall_curve, CurvePoint, ScoredPixels};
pub use evaluate::{evaluate, reports_to_tsv, EvalReport, REPORT_HEADER};
pub use pgm::{decode_pgm16, encode_pgm16, quantize_unit, read_pgm16, write_pgm16, PGM_MAXVAL};
pub use scores::{entropy_score, max_softmax_score, ScoreMethod};
pub use segment::{
    default_thresholds, segment_level_metrics, SegmentInput, SegmentMatchReport, ThresholdRow, PPV_FP_CUTOFF,
    SIOU_TP_CUTOFF,
};
