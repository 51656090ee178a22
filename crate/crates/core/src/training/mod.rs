//! Training objective, dataset assembly, the optimisation loop, checkpoint
//! persistence and end-to-end separation.

mod checkpoint;
mod data;
mod loss;
mod separate;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use data::{build_examples, load_corpus, load_track, Track, TrainingExample};
pub use loss::{compute_loss, lambda_rec, LossConfig, LossTerms};
pub use separate::{separate, Separation};
pub use trainer::{train, EpochMetrics, StepStats, TrainConfig, TrainOutcome, Trainer};

pub use crate::nn::gkl;
