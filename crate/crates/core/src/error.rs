use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("field kind mismatch: {0}")]
    KindMismatch(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("angular wavenumber {m} outside band |m| <= {limit}")]
    OutOfBand { m: i64, limit: i64 },

    #[error("singular mode system at (m={m}, k={k}), mu = {mu_re}{mu_im:+}i")]
    SpectralCollision {
        m: i64,
        k: i64,
        mu_re: f64,
        mu_im: f64,
    },

    #[error("right-hand side violates the zero-mean compatibility condition (defect {defect:.3e})")]
    ZeroMeanViolated { defect: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("quadrature did not converge: change {change:.3e} exceeds {tol:.1e}")]
    QuadratureNotConverged { change: f64, tol: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("malformed field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
