//! A small, dependency-light 2D CNN that learns the mapping from effective
//! channel vectors to max-min fair power allocations.
//!
//! The network is fixed to the shape used throughout this project: three
//! 2x2 "same"-padded convolutions with 8, 16 and 32 filters, a dense layer
//! of 64 units, dropout at rate 0.25 and a linear regression head that
//! emits one power fraction per user. Everything — tensors, convolution,
//! backpropagation, ADAM with exponential learning-rate decay, k-fold
//! training with early stopping, and the binary model format — is
//! implemented here in f64 so gradients can be verified against central
//! finite differences.
//!
//! Targets are power *fractions* `q / P`: labels produced by the max-min
//! solver sum to the budget, so fractions live on the unit simplex and the
//! learning problem is independent of the absolute power scale. Inference
//! multiplies by the budget and projects the result onto the power simplex,
//! guaranteeing feasibility.

pub mod adam;
pub mod data;
pub mod error;
pub mod infer;
pub mod io;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use data::{
    generate_dataset, ChannelSource, Dataset, DatasetSpec, FeatureMatrix, NormStats,
    PlacementMode, Sample,
};
pub use error::{CnnError, Result};
pub use infer::{infer_allocation, infer_detailed, Inference};
pub use io::{load_model, save_model};
pub use layers::{conv2d_same, relu};
pub use loss::{mae_loss, mae_loss_grad};
pub use model::{CnnModel, ForwardCache, Mode, ModelGrads};
pub use train::{train, EpochRecord, FoldSummary, TrainConfig, TrainOutcome};
