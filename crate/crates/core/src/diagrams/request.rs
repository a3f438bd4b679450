//! JSON requests and responses for batch diagram evaluation.
//!
//! A request file holds one object or an array of objects, each tagged by
//! `kind`:
//!
//! ```json
//! [
//!   {"kind": "evaluate", "skeleton": "c=1.2.0.0;l=0.2.3", "pins": [[0], [0], [0]], "n": 2},
//!   {"kind": "limit", "skeleton": "c=1.0;l=0.1", "pins": [[0,0,0,0,0], [2,0,0,0,0]], "tol": 1e-6},
//!   {"kind": "maximal_field", "k": 2, "n": 4, "dim": 1},
//!   {"kind": "check_recursion", "k": 2, "n": 4, "dim": 1},
//!   {"kind": "noninjective_check", "k": 2, "n": 4, "dim": 1}
//! ]
//! ```

use serde::{Deserialize, Serialize};

use super::{
    check_recursion, evaluate_limit, evaluate_truncated, maximal_diagram_fields,
    noninjective_reduction_check, DiagramValue, LimitPolicy, NoninjectiveReport, PinnedDiagram,
    RecursionReport,
};
use crate::error::Result;
use crate::skeletons::Skeleton;

pub const DIAGRAM_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagramRequest {
    Evaluate { skeleton: String, pins: Vec<Vec<i64>>, n: usize },
    Limit {
        skeleton: String,
        pins: Vec<Vec<i64>>,
        tol: f64,
        #[serde(default)]
        max_n: Option<usize>,
    },
    MaximalField { k: usize, n: usize, dim: usize },
    CheckRecursion { k: usize, n: usize, dim: usize },
    NoninjectiveCheck { k: usize, n: usize, dim: usize },
}

/// One site of a symmetric field, listed once per orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitValue {
    pub representative: Vec<u16>,
    pub orbit_size: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagramResponse {
    Value { schema_version: u32, request: DiagramRequest, result: DiagramValue },
    Field { schema_version: u32, request: DiagramRequest, radius: usize, orbits: Vec<OrbitValue> },
    Recursion { schema_version: u32, request: DiagramRequest, report: RecursionReport },
    Noninjective { schema_version: u32, request: DiagramRequest, report: NoninjectiveReport },
}

impl DiagramResponse {
    /// Whether a check-type response passed; value responses always do.
    pub fn passed(&self) -> bool {
        match self {
            DiagramResponse::Recursion { report, .. } => report.pass,
            DiagramResponse::Noninjective { report, .. } => report.pass,
            _ => true,
        }
    }
}

pub fn run_diagram_request(request: &DiagramRequest) -> Result<DiagramResponse> {
    let schema_version = DIAGRAM_SCHEMA_VERSION;
    let request_copy = request.clone();
    Ok(match request {
        DiagramRequest::Evaluate { skeleton, pins, n } => {
            let d = PinnedDiagram::new(Skeleton::parse(skeleton)?, pins.clone())?;
            DiagramResponse::Value { schema_version, request: request_copy, result: evaluate_truncated(&d, *n)? }
        }
        DiagramRequest::Limit { skeleton, pins, tol, max_n } => {
            let d = PinnedDiagram::new(Skeleton::parse(skeleton)?, pins.clone())?;
            let mut policy = LimitPolicy::new(*tol);
            if let Some(m) = max_n {
                policy.max_n = *m;
            }
            DiagramResponse::Value { schema_version, request: request_copy, result: evaluate_limit(&d, &policy)? }
        }
        DiagramRequest::MaximalField { k, n, dim } => {
            let field = maximal_diagram_fields(*k, *n, *dim)?.pop().unwrap();
            let domain = field.domain();
            let orbits = field
                .values()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &value)| OrbitValue {
                    representative: domain.representative(i).to_vec(),
                    orbit_size: domain.multiplicity(i),
                    value,
                })
                .collect();
            DiagramResponse::Field { schema_version, request: request_copy, radius: field.radius(), orbits }
        }
        DiagramRequest::CheckRecursion { k, n, dim } => {
            DiagramResponse::Recursion { schema_version, request: request_copy, report: check_recursion(*k, *n, *dim)? }
        }
        DiagramRequest::NoninjectiveCheck { k, n, dim } => DiagramResponse::Noninjective {
            schema_version,
            request: request_copy,
            report: noninjective_reduction_check(*k, *n, *dim)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_round_trip_through_json() {
        let text = r#"[
            {"kind": "evaluate", "skeleton": "c=1.2.0.0;l=0.2.3", "pins": [[0], [0], [0]], "n": 2},
            {"kind": "limit", "skeleton": "c=1.0;l=0.1", "pins": [[0,0,0], [1,0,0]], "tol": 1e-3},
            {"kind": "check_recursion", "k": 2, "n": 4, "dim": 1}
        ]"#;
        let parsed: Vec<DiagramRequest> = serde_json::from_str(text).unwrap();
        let again: Vec<DiagramRequest> = serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
        assert_eq!(parsed, again);
        match run_diagram_request(&parsed[0]).unwrap() {
            DiagramResponse::Value { result, .. } => assert_eq!(result.value, 13.0 / 32.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(run_diagram_request(&parsed[2]).unwrap().passed());
    }
}
