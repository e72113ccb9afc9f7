use crate::graph::FactorGraph;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weight {value} at table index {index} is outside the open interval (0,2)")]
    WeightOutOfRange { index: usize, value: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("sum of degrees {total} is not divisible by the check arity {k}")]
    NotDivisible { total: u64, k: usize },

    #[error("socket exhaustion in layer {layer}: no sockets left but {requested} neighborhoods requested")]
    SocketExhaustion {
        layer: usize,
        requested: usize,
        partial: Box<FactorGraph>,
    },

    #[error("enumeration cap exceeded: {size} variables, cap {cap}")]
    EnumerationCap { size: usize, cap: usize },

    #[error("degenerate measure: {0}")]
    Degenerate(String),

    #[error("population violates the mean constraint: deviation {deviation:.3e} > {tolerance:.1e}")]
    MeanConstraint { deviation: f64, tolerance: f64 },

    #[error("weight family violates SYM: max deviation {deviation:.3e}")]
    SymViolation { deviation: f64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
