use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("derivative order {requested} exceeds the supported maximum {max} for {what}")]
    UnsupportedOrder {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain has an empty interior at the requested resolution")]
    EmptyDomain,

    #[error("rejection sampling exceeded {0} draws")]
    SamplingExhausted(usize),

    #[error("singular value decomposition failed to converge")]
    Svd,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("nonlinear iteration diverged at stage {stage}, iteration {iteration}: residual {previous:.3e} -> {current:.3e}")]
    Diverged {
        stage: usize,
        iteration: usize,
        previous: f64,
        current: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
