//! Bilinear RPCA solver: training, inference and greedy rank estimation.

pub mod adam;
pub mod bilinear;
pub mod greedy;
pub mod infer;
pub mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use bilinear::{forward, grad_w, l1_loss};
pub use greedy::{default_lambda, greedy_objective, greedy_train, GreedyOutcome, RankSchedule};
pub use infer::{
    infer_stream, infer_stream_threads, BmatSinks, Decomposition, DecompositionSink, InferStats,
    NullSink,
};
pub use train::{gaussian_init, train, train_from, BearModel, TrainConfig, TrainOutcome};
