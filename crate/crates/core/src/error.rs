use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("moment basis exceeds the cap of {cap} monomials (degree {degree} is too large for {modes} mode(s))")]
    TruncationOverflow {
        cap: usize,
        degree: u32,
        modes: usize,
    },

    #[error("matrix exponential norm bound exceeded: |A t| = {norm:.3e} > {bound:.3e}")]
    ExpmOverflow { norm: f64, bound: f64 },

    #[error("drift matrix is defective or ill-conditioned (eigenvector condition {condition:.3e})")]
    DefectiveDrift { condition: f64 },

    #[error("kernel does not decay: rate {rate} has non-positive real part")]
    NonDecayingKernel { rate: String },

    #[error("resolvent is singular at s = {s}")]
    SingularResolvent { s: String },

    #[error("port mismatch: {0}")]
    PortMismatch(String),

    #[error("component is not linear: it carries entries of order {order}")]
    NotLinear { order: usize },

    #[error("unknown component `{0}`")]
    UnknownComponent(String),

    #[error("brute-force grid too large: estimated cost {cost} exceeds cap {cap}")]
    GridTooLarge { cost: u64, cap: u64 },

    #[error("segment too short: {len} samples (need at least {min})")]
    SegmentTooShort { len: usize, min: usize },

    #[error("Fock truncation leak: population {population:.3e} in the top level of mode {mode} exceeds {tolerance:.1e}; increase the truncation")]
    TruncationLeak {
        mode: usize,
        population: f64,
        tolerance: f64,
    },

    #[error("unphysical covariance: symplectic eigenvalue {nu:.6} below 1/2 by more than tolerance")]
    UnphysicalCovariance { nu: f64 },

    #[error("signature mismatch: {0}")]
    Signature(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown component type `{kind}`")]
    UnknownComponentType { line: usize, kind: String },

    #[error("component `{component}` is missing parameter `{parameter}`")]
    MissingParameter { component: String, parameter: String },

    #[error("line {line}: duplicate name `{name}`")]
    DuplicateName { line: usize, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
