//! Error type shared by every stage of the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("no wave train: {0}")]
    NoWaveTrain(String),
    #[error("zero eigenvalue of L_0 is not simple: {0}")]
    DegenerateZeroMode(String),
    #[error("eigenvalue branch lost during continuation: {0}")]
    BranchTrackingFailure(String),
    #[error("transverse truncation insufficient: boundary growth rate {boundary:.3e} not below {threshold:.3e}")]
    TruncationInsufficient { boundary: f64, threshold: f64 },
    #[error("parameters outside identity domain: {0}")]
    Domain(String),
    #[error("numerical instability at t = {time}: sup-norm {sup:.3e} exceeds {limit:.3e}")]
    Instability { time: f64, sup: f64, limit: f64 },
    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),
    #[error("kernel parameters do not belong to this wave train")]
    KernelMismatch,
    #[error("bound template does not dominate the field (violation fraction {violation:.3})")]
    NoDomination { violation: f64 },
    #[error("perturbation direction ({0}, {1}) is not a unit vector")]
    NotUnitVector(f64, f64),
    #[error("initial field violates the weighted bound: {0}")]
    WeightViolation(String),
    #[error("denominator 1 + psi_zeta = {0} too close to zero")]
    DenominatorTooSmall(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("series contains non-positive values")]
    NonPositiveValues,
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
