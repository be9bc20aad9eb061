use thiserror::Error;

use crate::rat::ParseRatError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("negative entry at state {state}, consequence {consequence}")]
    NegativeEntry { state: usize, consequence: usize },
    #[error("row for state {state} sums to {sum}, not {expected}")]
    RowSumNotOne { state: usize, sum: String, expected: String },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("weight {0} is not a probability or mixture weights do not sum to 1")]
    BadWeight(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("event must be a nonempty set of states")]
    EmptyEvent,
    #[error("function is not normalized: {0}")]
    NotNormalized(String),
    #[error("not a probability/utility pair: {0}")]
    NotProductForm(String),
    #[error("invalid probability/utility pair: {0}")]
    InvalidPair(String),
    #[error("the assessment is incoherent")]
    IncoherentAssessment,
    #[error("the event is potentially null")]
    NullEvent,
    #[error("no agreeing probability/utility pair exists")]
    NoAgreeingPair,
    #[error("the query requires mode A6")]
    RequiresA6Mode,
    #[error("the objective is unbounded over the dual set")]
    Unbounded,
    #[error("denominator is not bounded away from zero on the feasible region")]
    DenominatorNotBoundedAway,
    #[error("A6 propagation emptied the dual set")]
    IncoherentAfterPropagation,
    #[error("pinning consequence {0} broke coherence")]
    PinBrokeCoherence(usize),
    #[error("A6* closure emptied the dual set")]
    IncoherentClosure,
    #[error(transparent)]
    ParseRat(#[from] ParseRatError),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch { expected: expected.to_string(), found: found.to_string() }
}
