use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("orbit left the finite range at iterate {index}")]
    Overflow { index: usize },

    #[error("no positive fixed point: {violated} does not hold")]
    NoPositiveFixedPoint { violated: &'static str },

    #[error("precondition failed: {0}")]
    Precondition(&'static str),

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },

    #[error("domain error in {stage}: argument {value} outside admissible range")]
    Domain { stage: &'static str, value: f64 },

    #[error("domain error at rectangle level {level}: {source}")]
    RectangleLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("coordinate transformation is singular (eta1 == eta2)")]
    DegenerateTransform,

    #[error("period predicate is not monotone on the bracket: {samples:?}")]
    NonMonotone { samples: Vec<(f64, Option<usize>)> },
}
