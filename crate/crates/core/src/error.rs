use thiserror::Error;

/// Errors raised by the samplers, the adaptation and the finite-state lab.
#[derive(Debug, Error)]
pub enum IsirError {
    #[error(
        "domination violated: log proposal is {log_proposal} where log target is {log_target}"
    )]
    Domination { log_target: f64, log_proposal: f64 },

    #[error("all {n} proposal weights are zero")]
    ZeroWeights { n: usize },

    #[error("could not draw an initial state with positive weight after {attempts} attempts")]
    Initialisation { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration did not converge after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error(
        "cost not increasing in N (fitted slope {slope:e}); use a wider range of pilot N values"
    )]
    CostNotIncreasing { slope: f64 },

    #[error(
        "enumeration needs {terms} terms for N = {n}, above the budget of {budget}; \
         use mc_transition_and_rejection (--mc-samples) or the quadrature route instead"
    )]
    EnumerationBudget { n: usize, terms: f64, budget: f64 },

    #[error("kernel is not reversible: detailed-balance residual {residual:e}")]
    NotReversible { residual: f64 },

    #[error("kernel has a second eigenvalue {eigenvalue} too close to one")]
    NotErgodic { eigenvalue: f64 },

    #[error("#(Sp) > 1 required, model has a single support point")]
    SingleState,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsirError>;
