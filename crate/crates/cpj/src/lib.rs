//! Two-stream convolutional regressor scoring a saliency map against its
//! ground truth, trained on pairwise human preferences.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
mod kernels;
pub mod loss;
pub mod network;
pub mod train;

pub use config::{CpjConfig, InitScheme};
pub use error::{CpjError, Result};
pub use eval::{anchor_ordering, pairwise_accuracy, triplets_from_dataset, MapSource};
pub use loss::{PreparedTriplet, TrainingTriplet};
pub use network::{CpjInput, CpjNetwork};
pub use train::{train, train_with, TrainReport};
