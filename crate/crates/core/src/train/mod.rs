//! Optimization: Adam with weight decay on the convolution kernels, fold
//! training with best-validation checkpointing, and the two-component
//! ablation grid.
//!
//! Augmentation applies to training batches only. Each epoch shuffles with its
//! own stream derived from `(seed, epoch)`, and each case's augmentation
//! stream from `(seed, epoch, case id)`, so results do not depend on batch
//! composition or checkpoint timing.

mod ablation;
mod adam;
mod checkpoint;
mod config;
mod fit;

pub use ablation::{
    prepare_test, run_ablation_grid, score_test, AblationRow, AblationTable, FoldOutcome,
    GridOptions, GRID,
};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointMeta, META_FILE};
pub use config::{config_hash, TrainConfig};
pub use fit::{
    dataset_hash, evaluate, prepare_fold, run_hash, train_fold, train_fold_with, EpochRecord,
    FoldData, Halt, TrainOutcome,
};
