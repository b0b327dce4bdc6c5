use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no sign change on bracket [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("bisection did not converge in {iterations} iterations (bracket width {width})")]
    NoConvergence { iterations: usize, width: f64 },

    #[error("invalid specification: {0}")]
    BadSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("budget {m} exceeds population size {n}")]
    Budget { m: usize, n: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("empty file: {0}")]
    EmptyFile(String),

    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),

    #[error("forget mask covers the entire training set")]
    EmptyRetainSet,

    #[error("random labeling needs at least two classes")]
    SingleClass,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
