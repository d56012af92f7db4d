//! JSON bodies shared by the HTTP API and the command-line tool.

use serde_json::{json, Value};
use tea_core::diagnostic::to_json_array;
use tea_core::evaluate::EvaluationResult;
use tea_core::fairness::{map_coverage, ConsiderationMap};
use tea_core::lifecycle::{stage_coverage, stage_registry};
use tea_core::{AssuranceCase, Diagnostic};

pub fn diagnostics(diags: &[Diagnostic]) -> Value {
    to_json_array(diags)
}

/// `{stages: StageCoverage, considerations: MapCoverage}`
pub fn coverage(case: &AssuranceCase, map: &ConsiderationMap) -> Value {
    json!({
        "stages": stage_coverage(case),
        "considerations": map_coverage(case, map),
    })
}

pub fn evaluation(case: &AssuranceCase, result: &EvaluationResult) -> Value {
    result.to_json(case)
}

pub fn stages() -> Value {
    json!(stage_registry())
}

/// `{map, entries: [...]}`
pub fn considerations(map: &ConsiderationMap) -> Value {
    json!({ "map": map.id, "entries": map.to_json() })
}

pub fn error(code: &str, message: impl Into<String>) -> Value {
    json!({ "code": code, "message": message.into() })
}
