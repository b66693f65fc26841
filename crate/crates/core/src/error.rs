use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("integrability condition near zero fails: {0}")]
    NotIntegrableAtZero(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parameter constraint violated for `{name}`: {constraint}")]
    Constraint { name: String, constraint: String },
    #[error("unknown built-in `{0}`")]
    UnknownBuiltin(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("singular linear system at mu = {mu}: {detail}")]
    Singular { mu: f64, detail: String },
    #[error("non-finite residual at node {node}")]
    NonFinite { node: usize },
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("numerical noise too large: {0}")]
    Noise(String),
    #[error("no negative-energy subsolution: J(minimizer) = {energy}")]
    NoNegativeEnergy { energy: f64 },
    #[error("gradient cutoff escalation exhausted at R = {r} with max gradient {gradient}")]
    EscalationExhausted { r: f64, gradient: f64 },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
