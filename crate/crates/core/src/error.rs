use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` takes 1 argument but {found} were given (offset {offset})")]
    Arity { name: String, found: usize, offset: usize },

    #[error("domain error: {reason} in `{subexpr}`")]
    Domain { reason: &'static str, subexpr: String },

    #[error("point {point:?} lies outside the chart domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("finite-difference step {step} leaves the chart domain at {point:?}")]
    StepTooLarge { step: f64, point: Vec<f64> },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("metric not positive definite at {point:?} (smallest eigenvalue {eigenvalue:e})")]
    NotSpd { point: Vec<f64>, eigenvalue: f64 },

    #[error("metric not symmetric: {0}")]
    NotSymmetric(String),

    #[error("frame degenerate at {point:?}: {detail}")]
    DegenerateFrame { point: Vec<f64>, detail: String },

    #[error("invalid net: {0}")]
    InvalidNet(String),

    #[error("product spec violates its kind: {0}")]
    KindConstraint(String),

    #[error("{what} is not positive at {point:?} (value {value:e})")]
    NonPositive { what: String, point: Vec<f64>, value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("path-order inconsistency {residual:e} exceeds {tolerance:e}: potential is not a gradient")]
    PathInconsistent { residual: f64, tolerance: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (last change {change:e})")]
    Quadrature { a: f64, b: f64, change: f64 },

    #[error("tensor is not self-adjoint at {point:?} (defect {defect:e})")]
    NotSelfAdjoint { point: Vec<f64>, defect: f64 },

    #[error("eigenvalue coalescence at {point:?}: {detail}")]
    Coalescence { point: Vec<f64>, detail: String },

    #[error("tensor is not Codazzi: residual {residual:e} at {point:?}")]
    NotCodazzi { point: Vec<f64>, residual: f64 },

    #[error("eigenvalue must be constant along its eigenbundle: {0}")]
    ConstantEigenvalueViolated(String),

    #[error("candidate rejected: {0}")]
    Rejected(String),

    #[error("manifest error at {pointer}: {message}")]
    Manifest { pointer: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
