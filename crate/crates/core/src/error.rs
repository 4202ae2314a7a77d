use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("rollout diverged at step {step}")]
    Divergence { step: usize },

    #[error("insufficient history: need {needed} entries, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("regressor at t={t} is rank deficient (condition number {condition:.3e})")]
    RankDeficient { t: usize, condition: f64 },

    #[error("observability matrix has rank {rank}, need {required} (t={t}, q={q})")]
    Unobservable {
        t: usize,
        q: usize,
        rank: usize,
        required: usize,
    },

    #[error("too few rollouts: {given} given, at least {required} required")]
    TooFewRollouts { given: usize, required: usize },

    #[error("control Hessian is singular at t={t}")]
    SingularControlHessian { t: usize },

    #[error("every line-search candidate diverged")]
    LineSearchDiverged,

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{scenario} (seed {seed}): {source}")]
    Run {
        scenario: &'static str,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            e => Error::Iteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }

    /// True when the error (or its iteration-wrapped source) is a divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::LineSearchDiverged => true,
            Error::Iteration { source, .. } | Error::Run { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
