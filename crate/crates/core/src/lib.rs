//! Low-rank + sparse decomposition with a bilinear factor model `L = W·Wᵀ·Y`.

pub mod baselines;
pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod nmf;
pub mod rng;
pub mod score;
pub mod solver;
pub mod svd;
pub mod synth;

pub use baselines::{ialm_rpca, nmf_mu, IalmConfig, IalmResult, NmfMuResult};
pub use error::{BearError, Result};
pub use matrix::{approx_eq, fro_norm, l1_norm, relative_error, Matrix, Real};
pub use nmf::{
    cascade_train, extract_footprints, nmf_train, CascadeModel, CascadeOutcome, Footprints,
    NmfModel, NmfOutcome,
};
pub use solver::{
    greedy_train, infer_stream, train, BearModel, Decomposition, GreedyOutcome, RankSchedule,
    TrainConfig, TrainOutcome,
};
pub use svd::{nuclear_norm, svd_small, SvdResult};
pub use synth::{gen_low_rank, gen_sparse, gen_video, BlobVideoTruth, VideoSpec};
