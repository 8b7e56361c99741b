//! Crate-wide error type. Messages are single lines suitable for CLI
//! diagnostics.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("non-finite sample")]
    NonFiniteSample,

    #[error("level out of range: {0}")]
    LevelOutOfRange(f64),

    #[error("weights must be strictly positive")]
    NonPositiveWeight,

    #[error("weights sum to {0}, further than 1e-12 from 1")]
    WeightSum(f64),

    #[error("mismatched lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error("distortion is not monotone on [0,1] with h(0)=0, h(1)=1: {0}")]
    BadDistortion(String),

    #[error("slope limit undefined for non-concave h")]
    NonConcave,

    #[error("subset size (1-p)*n = {0} is not an integer")]
    SubsetSize(f64),

    #[error("dimension mismatch: measure space has {expected} cells, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measure takes laws, not cell vectors (or vice versa)")]
    DomainMismatch,

    #[error("empty family")]
    EmptyFamily,

    #[error("family fails UI premise")]
    FamilyFailsUiPremise,

    #[error("test distortion is expectation-dominated")]
    ExpectationDominated,

    #[error("empty feasible set A")]
    EmptyFeasibleSet,

    #[error("inconclusive at horizon")]
    InconclusiveAtHorizon,

    #[error("witness threshold unreachable at double precision")]
    WitnessUnreachable,

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
