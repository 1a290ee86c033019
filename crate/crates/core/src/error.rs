use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range caller input.
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    /// A model broke its rate contract (bound, sign, state space).
    #[error("model contract violated: {0}")]
    ModelContract(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("trajectory is not proper: vertices {first} and {second} both jump at t = {time}")]
    NotProper { time: f64, first: usize, second: usize },
    #[error("capacity exceeded: {what} ({count} > {cap})")]
    Capacity {
        what: &'static str,
        count: usize,
        cap: usize,
    },
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ModelContract(msg.into())
    }
}
