use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate metric at q = {at:?}")]
    DegenerateMetric { at: Vec<f64> },
    #[error("metric is not positive definite at q = {at:?}")]
    NotPositiveDefinite { at: Vec<f64> },
    #[error("constraint forms are dependent at q = {at:?} (Gram condition number {condition:.3e})")]
    DependentConstraints { at: Vec<f64>, condition: f64 },
    #[error("constraint form {index} depends on velocities; only linear constraints are supported")]
    NonlinearConstraint { index: usize },
    #[error("time form vanishes at q = {at:?}")]
    ZeroTimeForm { at: Vec<f64> },
    #[error("time form is not closed at q = {at:?} (curl {defect:.3e})")]
    NotClosed { at: Vec<f64>, defect: f64 },
    #[error("gradient of the time form is isotropic at q = {at:?}")]
    IsotropicTimeForm { at: Vec<f64> },
    #[error("state lies on the zero section; the class of time is undefined there")]
    ZeroVelocity,
    #[error("singular Jacobian at q = {at:?}")]
    SingularJacobian { at: Vec<f64> },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("non-finite acceleration at q = {q:?}, qdot = {qdot:?}")]
    NonFinite { q: Vec<f64>, qdot: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
