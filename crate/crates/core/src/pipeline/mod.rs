//! Training, evaluation, cross-validation, grid search and the gradient
//! flatness diagnostic.

mod cv;
mod eval;
mod examples;
mod flatness;
mod grid;
mod optim;
mod record;
mod train;
mod transfer;

pub use cv::{kfold_assign, kfold_cv, CvReport, Fold, MetricSummary};
pub use eval::{evaluate, predict_probabilities};
pub use examples::Examples;
pub use flatness::{flatness_diagnostic, qtl_flatness, FlatnessStats};
pub use grid::{
    best_cell, cell_file_name, cell_seed, grid_search, ExperimentResult, GridOptions, GridOutcome, GridSpec, IntRange,
};
pub use optim::{step_lr, Adam, TrainConfig};
pub use record::{write_atomic, ResultRecord, RunTag};
pub use train::{train, train_with_progress, TrainReport};
pub use transfer::{model_seeds, run_transfer, TransferConfig, TransferOutcome};
