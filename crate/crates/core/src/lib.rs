//! Tversky ratio-model similarity over binary attribute vectors.
//!
//! The crate covers the full pipeline: loading labeled attribute data and
//! sampling similar/dissimilar pairs ([`data`]), the similarity measures and
//! their parameter gradients ([`measures`]), the margin contrastive objective
//! ([`loss`]), projected first-order optimizers ([`optim`]), the mini-batch
//! training loop with validation early stopping ([`trainer`]), threshold
//! classifier evaluation ([`eval`]) and the on-disk model format ([`model`]).
//!
//! Batch scoring fans out over rayon when the `parallel` feature is enabled
//! (the default). Work is split into fixed-size chunks whose partial results
//! are combined in chunk order, so parallel and sequential runs produce
//! bitwise identical numbers.

pub mod data;
pub mod eval;
pub mod loss;
pub mod measures;
pub mod model;
pub mod optim;
pub mod par;
pub mod trainer;

pub use data::{FeatureVector, LabeledItem, LabeledItemSet, PairExample, PairSampler, SplitSpec};
pub use eval::{EvalConfig, EvalResult};
pub use loss::LossConfig;
pub use measures::{BaselineParams, Family, Measure, Similarity, TverskyParams};
pub use model::ModelFile;
pub use optim::{OptimizerConfig, OptimizerFamily};
pub use par::Execution;
pub use trainer::{TrainConfig, TrainReport};
