use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value while differentiating with respect to `{coordinate}`")]
    NonFinite { coordinate: String },

    #[error("constraint `{constraint}` is not defined at this point: {reason}")]
    Domain { constraint: String, reason: String },

    #[error("degenerate constraint bracket matrix (condition number {condition:.3e})")]
    DegenerateConstraints { condition: f64 },

    #[error("projection did not converge after {iterations} iterations (max residual {max_residual:.3e})")]
    ProjectionFailed {
        iterations: usize,
        residuals: Vec<f64>,
        max_residual: f64,
    },

    #[error("point is off the constraint surface: residuals {residuals:?}")]
    OffSurface { residuals: Vec<f64> },

    #[error("outside the chart domain: {0}")]
    ChartDomain(String),

    #[error("superluminal boost: |beta| = {0} >= 1")]
    Superluminal(f64),

    #[error("four-momentum is not timelike (P0^2 - |P|^2 = {0})")]
    NotTimelike(f64),

    #[error("singular value: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gauge function vanishes at t = {t} (phi = {phi:e})")]
    SingularGauge { t: f64, phi: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("structure error: {0}")]
    Structure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
