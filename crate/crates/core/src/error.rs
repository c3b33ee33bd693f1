use thiserror::Error;

/// Errors produced by the library. The CLI maps each variant onto an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Relative redundancy is undefined because the entropy at sigma is (numerically) zero.
    #[error("degenerate entropy: H({sigma}) = {entropy:e} bits is below {floor:e}")]
    DegenerateEntropy { sigma: f64, entropy: f64, floor: f64 },

    /// A numerical procedure (root bracket, search, quadrature, ODE) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A serialized artifact is malformed or fails its integrity check.
    #[error("format error: {0}")]
    Format(String),

    /// The arithmetic decoder ran out of input or hit an impossible state.
    #[error("decode error: {0}")]
    Decode(String),

    /// An experiment configuration cannot be satisfied.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
