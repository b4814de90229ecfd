use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state")]
    NonFiniteState,

    #[error("integration stalled at t = {t} (step {step:e})")]
    IntegrationStalled { t: f64, step: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration failed: no n <= {cap} meets the two-solution criterion for lambda = {lambda}, M = {mass}")]
    CalibrationFailed { lambda: f64, mass: f64, cap: u64 },

    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),

    #[error("spectrum truncation insufficient: no frequency above the split threshold {threshold}")]
    TruncationInsufficient { threshold: f64 },

    #[error("insufficient truncation: maximum certifiable horizon is {max_horizon}")]
    HorizonUnreachable { max_horizon: f64 },

    #[error("coercivity violated: lambda = {lambda} < sqrt(2) * {damping}")]
    CoercivityViolated { lambda: f64, damping: f64 },

    #[error("epsilon out of range: need 0 < epsilon < lambda (epsilon = {epsilon}, lambda = {lambda})")]
    EpsilonOutOfRange { epsilon: f64, lambda: f64 },

    #[error("phase matching failed: alignment residual {residual:e}")]
    PhaseMatchingFailed { residual: f64 },

    #[error("budget too small: transition width {width:e} is not representable")]
    BudgetTooSmall { width: f64 },

    #[error("overdamping hypothesis violated: delta = {value} < lambda = {lambda} at t = {t}")]
    OverdampingViolated { t: f64, value: f64, lambda: f64 },

    #[error("riccati bound violated at t = {t}: {detail}")]
    RiccatiBoundViolated { t: f64, detail: String },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
