use thiserror::Error;

/// Errors raised by the numerical core and the samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of a special function or sampler.
    #[error("{what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    /// GIG parameters for which the normalising integral diverges.
    #[error("no GIG regime applies to (eta={eta}, chi={chi}, psi={psi}); the normaliser diverges")]
    GigRegime { eta: f64, chi: f64, psi: f64 },

    /// A leaf with `s = 0` and `r >= c`: the integrated likelihood diverges.
    #[error("leaf integrated likelihood diverges (r={r} >= c={c} with s=0)")]
    DivergentLeaf { r: f64, c: f64 },

    /// Invalid model or sampler configuration.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Non-finite values encountered while sampling.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
