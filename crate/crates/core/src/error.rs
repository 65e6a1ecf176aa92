use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbcError {
    /// A caller broke a documented precondition (dimensions, ranges, budgets).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Parameter outside the model's valid domain (e.g. non-positive scale).
    #[error("parameter outside model domain: {0}")]
    Domain(String),

    /// Linear algebra failure such as a singular or indefinite matrix.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A sampler run accepted nothing.
    #[error("no particles accepted ({proposed} proposed, bandwidth {bandwidth})")]
    EmptyAcceptance { proposed: usize, bandwidth: f64 },

    /// Optimizer exhausted its budget on every start; carries the best iterate seen.
    #[error("optimizer did not converge; best iterate {best:?} (objective {value})")]
    NoConvergence { best: Vec<f64>, value: f64 },

    /// Error tagged with the experiment cell it came from.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<AbcError>,
    },
}

impl AbcError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        AbcError::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        AbcError::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        AbcError::Numerical(msg.into())
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        AbcError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, AbcError>;
