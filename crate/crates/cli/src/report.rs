// SPDX-License-Identifier: Apache-2.0

//! The JSON report envelope shared by every subcommand.

use mcconv::cyclo::CycloNum;
use mcconv::error::Error;
use mcconv::localdata::Conventions;
use serde::Serialize;

/// An exact value with its display form and a non-normative complex approximation.
#[derive(Debug, Clone, Serialize)]
pub struct Exact {
    pub value: CycloNum,
    pub text: String,
    pub approx_re: f64,
    pub approx_im: f64,
}

impl From<&CycloNum> for Exact {
    fn from(v: &CycloNum) -> Self {
        let (re, im) = v.approx();
        Exact { value: v.clone(), text: v.to_string(), approx_re: re, approx_im: im }
    }
}

impl From<CycloNum> for Exact {
    fn from(v: CycloNum) -> Self {
        Exact::from(&v)
    }
}

/// A value that may be unavailable, with the machine-readable reason.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Maybe {
    Value(Exact),
    Unavailable { unavailable: ErrorBody },
}

impl From<Result<CycloNum, Error>> for Maybe {
    fn from(r: Result<CycloNum, Error>) -> Self {
        match r {
            Ok(v) => Maybe::Value(v.into()),
            Err(e) => Maybe::Unavailable { unavailable: ErrorBody::from(&e) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody { code: e.code().into(), message: e.to_string() }
    }
}

/// Top-level report: the command, the conventions in force, and a result or an error.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: &'static str,
    pub conventions: Conventions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}
