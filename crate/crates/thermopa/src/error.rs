use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("unknown unit tag `{0}`")]
    UnknownUnit(String),
    #[error("cannot convert {from} to {to}: different dimensions")]
    UnitMismatch {
        from: &'static str,
        to: &'static str,
    },
    #[error("curve file {path}: {message}")]
    CurveFormat { path: String, message: String },
    #[error("curve `{label}` cannot be evaluated at R = {r} bohr (below first sample {first})")]
    Extrapolation { label: String, r: f64, first: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("Chebyshev recurrence diverged at order {order}: spectral bounds [{e_min}, {e_max}] do not bracket H")]
    BoundsViolated {
        order: usize,
        e_min: f64,
        e_max: f64,
    },
    #[error("norm drift {drift:e} exceeds the allowed {limit:e}")]
    NormDrift { drift: f64, limit: f64 },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("state filter left no states for J = {0}")]
    EmptyStateSet(u32),
    #[error("partial-wave sum not converged: last J = {j} carries fraction {fraction:e} > {tolerance:e}")]
    TruncationNotConverged {
        j: u32,
        fraction: f64,
        tolerance: f64,
    },
    #[error("projection residual {residual:e} above {threshold:e} for J = {j}: raise N_m")]
    ProjectionResidual {
        j: u32,
        residual: f64,
        threshold: f64,
    },
    #[error("excited-state yield is zero; density matrix undefined")]
    ZeroYield,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownUnit(_)
            | Error::UnitMismatch { .. }
            | Error::CurveFormat { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidGrid(_) => 2,
            Error::BoundsViolated { .. }
            | Error::NormDrift { .. }
            | Error::Eigensolver(_)
            | Error::ZeroYield
            | Error::EmptyStateSet(_)
            | Error::Extrapolation { .. }
            | Error::Layout(_) => 3,
            Error::TruncationNotConverged { .. } | Error::ProjectionResidual { .. } => 4,
            Error::Io(_) => 5,
        }
    }
}
