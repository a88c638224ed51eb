//! Losses, training loop, patch aggregation, late fusion and reporting.

mod eval;
mod fusion;
mod loss;
mod report;
mod trainer;

pub use eval::{evaluate, recording_probabilities, Branch, EvalOptions, RecordingFeatures};
pub use fusion::{average_patches, predict_label, prod_fusion, FusionInput, PredictionSet};
pub use loss::{
    add_l2_gradient, cross_entropy_loss, kl_mixup_loss, l2_penalty, LossOutput, PROB_FLOOR,
};
pub use report::{EvalReport, GroupAccuracy, Outcome};
pub use trainer::{
    patch_accuracy, predict_patches, train, EpochStats, LossCurve, LossKind, PatchDataset,
    TrainingConfig,
};
