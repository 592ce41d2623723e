use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty series: {0}")]
    EmptySeries(&'static str),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("range {start}..{end} out of bounds for length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },

    #[error("day has no news items")]
    EmptyDay,

    #[error("sharpe ratio undefined: flagged returns have zero standard deviation")]
    UndefinedSharpe,

    #[error("insufficient data: need at least {needed} days, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("forward trace was produced by different parameters")]
    StaleTrace,

    #[error("tuning failed: every trial diverged")]
    TuningFailed,

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("no day with at least two news items")]
    EmptyReport,
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
