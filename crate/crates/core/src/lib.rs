//! Core data model, preprocessing, I/O and evaluation for saliency benchmarking.

pub mod density;
pub mod error;
pub mod io;
pub mod judgments;
pub mod manifest;
pub mod map;
pub mod metrics;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use judgments::{JudgmentDataset, JudgmentRecord};
pub use manifest::{Benchmark, Manifest};
pub use map::{FixationSet, MapPair, Point, SaliencyMap};
pub use metrics::{evaluate, evaluate_all, EvalContext, MetricId, Polarity};
