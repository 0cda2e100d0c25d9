use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {detail}")]
    ParamDomain { name: &'static str, detail: String },

    #[error("unsupported operator: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("dt = {dt:e} exceeds the stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("non-finite value during march at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("out of range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("expression error at {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error("kernel evaluation failed at t = {t}, x = {x:?}, z = {z:?}: value {value}")]
    Sample { t: f64, x: Vec<f64>, z: Vec<f64>, value: f64 },

    #[error("profile is not even: p({z:?}) = {a} but p(-z) = {b}")]
    NotEven { z: Vec<f64>, a: f64, b: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, detail: impl Into<String>) -> Error {
    Error::ParamDomain { name, detail: detail.into() }
}
