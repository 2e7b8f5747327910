use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient index {index} out of range for explicit sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid coefficient model: {0}")]
    InvalidModel(String),
    #[error("radius {0} outside the admissible range")]
    InvalidRadius(f64),
    #[error("intensity L = {0} must be positive")]
    InvalidIntensity(f64),
    #[error("intensity L = {0} outside the range supported by this estimator")]
    IntensityOutOfRange(f64),
    #[error("point {0} lies outside the open unit disk")]
    InvalidPoint(num_complex::Complex64),
    #[error("series did not converge within the cap of {cap} terms")]
    NoConvergence { cap: usize },
    #[error("matrix size {size} exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },
    #[error("coefficient sequence is not non-increasing (first increase at n = {0})")]
    NotMonotone(usize),
    #[error("index subset is empty")]
    EmptySubset,
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("polynomial has zero constant term")]
    ZeroConstantTerm,
    #[error("coupling ratio |c_n/b_n| = {ratio} at n = {index} is not in (0, 1]")]
    RatioOutOfRange { index: usize, ratio: f64 },
    #[error("tilt q_{index} = {value} exceeds 1")]
    TiltOutOfRange { index: usize, value: f64 },
    #[error("compute budget exceeded: {requested} coefficient evaluations > cap {cap}")]
    BudgetExceeded { requested: f64, cap: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}
