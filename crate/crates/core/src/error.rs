use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),
    #[error("unphysical covariance matrix: smallest symplectic eigenvalue {min_lambda:.3e} < 1/2")]
    UnphysicalState { min_lambda: f64 },
    #[error("empty region selected")]
    EmptyRegion,
    #[error("layout mismatch: expected {expected} modes, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("zero-frequency normal mode in a Hamiltonian declared gapped (smallest eigenvalue {0:.3e})")]
    ZeroModeAtFiniteMass(f64),
    #[error("invalid partition: {n_system} system pixels out of {n_total}")]
    InvalidPartition { n_system: usize, n_total: usize },
    #[error("target energy {target:.6e} is not above the zero-point energy {zero_point:.6e}")]
    BelowZeroPoint { target: f64, zero_point: f64 },
    #[error("underdetermined fit: rank {rank} for {unknowns} unknowns ({equations} equations)")]
    UnderdeterminedFit {
        equations: usize,
        unknowns: usize,
        rank: usize,
    },
    #[error("symmetric factorization failed: most negative eigenvalue {0:.3e}")]
    FactorizationFailure(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("{failed} of {total} bootstrap resamples failed (limit 5%)")]
    TooManyFailedResamples { failed: usize, total: usize },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::InvalidPartition { .. } => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
