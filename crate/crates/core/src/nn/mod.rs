//! Training engine: reverse-mode tape, convolutional segmentation net,
//! ADAM with decoupled weight decay, checkpoint format and trainer.

mod adam;
mod checkpoint;
mod conv;
mod segnet;
mod tape;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{Checkpoint, ParamBlob, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use segnet::{SegNet, SegNetConfig};
pub use tape::{Gradients, Tape, Var};
pub(crate) use train::predict_with;
pub use train::{
    format_log_line, predict, train, BeliefMap, TrainConfig, TrainOutcome, TrainRecord, FULL_SCALE_BATCH_SIZE,
    FULL_SCALE_ITERATIONS, FULL_SCALE_LEARNING_RATE, FULL_SCALE_WEIGHT_DECAY,
};
