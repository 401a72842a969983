use thiserror::Error;

use crate::maps::EscapeReason;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("degenerate parameter: {0} is exactly zero")]
    DegenerateParameter(&'static str),
    #[error("wrong case: {0}")]
    WrongCase(String),
    #[error("strip index {n} is below the first admissible index {n0}")]
    IndexTooSmall { n: i64, n0: i64 },
    #[error("logarithm of a nonpositive argument")]
    NonpositiveLogArgument,
    #[error("orbit left the domain: {0:?}")]
    NotInDomain(EscapeReason),
    #[error("every point of the trace escaped")]
    EmptyAfterEscape,
    #[error("sign pattern does not match the double-helix hypothesis")]
    WrongSignPattern,
    #[error("malformed curve: {0}")]
    MalformedCurve(String),
    #[error("certification failed at {condition}: {witness}")]
    CertificationFailed { condition: String, witness: String },
    #[error("word {0:?} could not be realized")]
    WordUnrealized(Vec<usize>),
    #[error("cone violated at (psi={psi}, z={z}) by vector ({du}, {dv})")]
    ConeViolated { psi: f64, z: f64, du: f64, dv: f64 },
    #[error("no root in bracket: {0}")]
    NoRootInBracket(String),
    #[error("no tip found for n={0}")]
    NoTipFound(i64),
    #[error("continuation seed is not bracketed")]
    SeedNotBracketed,
    #[error("continuation stalled at alpha={alpha}, beta={beta}")]
    ContinuationStalled { alpha: f64, beta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no tangency found for n={0}")]
    TangencyNotFound(i64),
    #[error("eigenvalues inconsistent with lambda1 < mu")]
    InconsistentWithH1,
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
