use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("rank deficient collocation system (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.3e} in {context}")]
    Residual {
        context: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("near-singular block at mode {k} (smallest pivot {pivot:.3e})")]
    SingularBlock { k: usize, pivot: f64 },
    #[error("volume tail did not fall below {tolerance:.1e} before radius {radius:.3e}")]
    TailBound { radius: f64, tolerance: f64 },
    #[error("fixed-point iteration did not converge; ratios {ratios:?}")]
    Divergence { ratios: Vec<f64> },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
