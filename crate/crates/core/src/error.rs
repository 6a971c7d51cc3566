// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type with stable machine-readable codes.

use thiserror::Error;

use crate::cyclo::CycloError;
use crate::field::FieldError;
use crate::localdata::LocalError;

/// Errors of the convolution, determinant, oracle and pipeline layers.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cyclo(#[from] CycloError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error("the convolution character must be nontrivial")]
    TrivialConvolutionChar,
    #[error("sheaf is not in standard situation with respect to the character: {0}")]
    NotStandardSituation(String),
    #[error("input is a translated Kummer sheaf of the inverse character")]
    ExcludedKummerTranslate,
    #[error("no stalk determinant available at y = {0}")]
    MissingStalkDet(u32),
    #[error("sample point y = {0} lies in the singular locus")]
    PointInS(u32),
    #[error("an invariant Frobenius scalar is unknown: {0}")]
    UnknownInvariantScalar(String),
    #[error("stalk trace is not derivable: {0}")]
    UnknownStalk(String),
    #[error("expected dimension {dim} exceeds the bound {bound}")]
    DimensionOverflow { dim: usize, bound: usize },
    #[error("traces are not explained by any dimension up to {0}")]
    InconsistentTraces(usize),
    #[error("hypothesis ({clause}) failed: {detail}")]
    HypothesisFailed { clause: String, detail: String },
    #[error("symbolic and oracle tracks disagree: {0}")]
    CrossCheckFailed(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

impl Error {
    /// Stable code used in JSON error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Field(e) => match e {
                FieldError::NotPrime(_) => "NotPrime",
                FieldError::SizeLimitExceeded { .. } => "SizeLimitExceeded",
                FieldError::DegreeMismatch { .. } => "DegreeMismatch",
                _ => "FieldError",
            },
            Error::Cyclo(e) => match e {
                CycloError::DivisionByZero => "DivisionByZero",
                CycloError::ZeroInput => "ZeroInput",
                CycloError::Malformed(_) => "MalformedCycloNum",
            },
            Error::Local(e) => match e {
                LocalError::PointCollision { .. } => "PointCollision",
                LocalError::ZeroScalar => "ZeroScalar",
                LocalError::NotIrreducible(_) => "NotIrreducible",
                LocalError::UnknownScalar(_) => "UnknownInvariantScalar",
                _ => "InvalidLocalData",
            },
            Error::TrivialConvolutionChar => "TrivialConvolutionChar",
            Error::NotStandardSituation(_) => "NotStandardSituation",
            Error::ExcludedKummerTranslate => "ExcludedKummerTranslate",
            Error::MissingStalkDet(_) => "MissingStalkDet",
            Error::PointInS(_) => "PointInS",
            Error::UnknownInvariantScalar(_) => "UnknownInvariantScalar",
            Error::UnknownStalk(_) => "UnknownStalk",
            Error::DimensionOverflow { .. } => "DimensionOverflow",
            Error::InconsistentTraces(_) => "InconsistentTraces",
            Error::HypothesisFailed { .. } => "HypothesisFailed",
            Error::CrossCheckFailed(_) => "CrossCheckFailed",
            Error::Unsupported(_) => "Unsupported",
            Error::Schema(_) => "SchemaViolation",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
