//! Optimization: Adam, the plateau scheduler, angle-noise injection and the
//! epoch loop with validation, logging and checkpointing.

mod config;
mod data;
mod optim;
mod run;

pub use config::TrainConfig;
pub use data::{load_samples, split_indices, Sample};
pub use optim::{
    clip_grad_norm, inject_angle_noise, plateau_schedule, AdamState, PlateauScheduler, ADAM_BETA1,
    ADAM_BETA2, ADAM_EPSILON,
};
pub use run::{
    sample_loss, train, train_with_progress, validation_loss, EpochSummary, LogRow, TrainOutcome,
    AUDIT_FILE, BEST_CHECKPOINT, LAST_CHECKPOINT, LOG_FILE, NONFINITE_DUMP,
};
