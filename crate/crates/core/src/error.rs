use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty measure")]
    EmptyMeasure,
    #[error("non-finite position")]
    NonFinitePosition,
    #[error("not in Γ_N: minimum {0} is not 0")]
    NotInGamma(f64),
    #[error("invalid tail function: {0}")]
    InvalidTail(String),
    #[error("infinite W₁")]
    InfiniteW1,
    #[error("subcritical speed {0} < √2")]
    SubcriticalSpeed(f64),
    #[error("no selection events: N = 1")]
    NoSelectionEvents,
    #[error("cannot move time backwards from {from} to {to}")]
    TimeReversal { from: f64, to: f64 },
    #[error("scheme blowup: total mass {0} below 1 after growth")]
    SchemeBlowup(f64),
    #[error("wrong centring: {0}")]
    WrongCentring(String),
    #[error("too few samples: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("boundary undefined at t = {0}")]
    BoundaryUndefined(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
