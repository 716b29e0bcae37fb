pub type Result<T> = std::result::Result<T, CpjError>;

#[derive(Debug, thiserror::Error)]
pub enum CpjError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("input is {found:?}, network expects {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error("empty batch or training set")]
    EmptyBatch,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] salbench_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
