use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inclusion-exclusion lost {digits_lost:.1} decimal digits to cancellation")]
    Cancellation { digits_lost: f64 },

    #[error("quadrature did not converge: estimated error {achieved:.3e} after {evaluations} evaluations")]
    Quadrature { achieved: f64, evaluations: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("row {row}: non-finite value")]
    NonFinite { row: usize },

    #[error("row {row}: zero-norm vector cannot be normalized")]
    ZeroNorm { row: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("all coordinates dropped after {retries} resampling attempts")]
    DropoutExhausted { retries: usize },

    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("training diverged at epoch {epoch}: loss {loss:.4} exceeds {limit:.4}")]
    Diverged {
        epoch: usize,
        loss: f64,
        limit: f64,
        trace: Vec<f64>,
    },

    #[error("no convergence after {steps} steps (residual {residual:.3e})")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("every conditional slice is empty for K = {k}")]
    AllSlicesEmpty { k: usize },

    #[error("histograms have different bin edges")]
    EdgeMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cancellation { .. }
                | Error::Quadrature { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NoConvergence { .. }
                | Error::AllSlicesEmpty { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
