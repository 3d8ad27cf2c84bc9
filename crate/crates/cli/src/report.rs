//! Report assembly. Everything that depends only on inputs and seeds goes in
//! `results`; wall-clock timings stay outside it so that reruns produce
//! byte-identical results.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use sqnm::squash::{Estimate, ExtensionCandidate, RunSummary};
use sqnm::qstate::DensityMatrix;

use crate::descriptor;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub input_digest: String,
    pub command: String,
    pub parameters: Value,
    pub results: Value,
    pub seeds: Value,
    pub wall_time_ms: u64,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub timings_ms: BTreeMap<String, u64>,
}

impl Report {
    pub fn new(command: &str, inputs: &[Value], parameters: Value, seeds: Value) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            input_digest: descriptor::digest(&Value::Array(inputs.to_vec())),
            command: command.into(),
            parameters,
            results: Value::Null,
            seeds,
            wall_time_ms: 0,
            flags: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Round to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// A state in descriptor form, so it can be fed back as input.
pub fn state_json(state: &DensityMatrix) -> Value {
    serde_json::to_value(descriptor::to_descriptor(state)).expect("descriptor serializes")
}

pub fn candidate_json(c: &ExtensionCandidate) -> Value {
    json!({
        "e_dim": c.e_dim,
        "e_systems": c.e_names(),
        "provenance": c.provenance,
        "extended_state": state_json(&c.extended_state),
    })
}

fn run_json(r: &RunSummary) -> Value {
    json!({
        "index": r.index,
        "e_dim": r.e_dim,
        "provenance": r.provenance,
        "initial": r.initial,
        "value": r.value,
        "evals": r.evals,
        "converged": r.converged,
    })
}

/// Estimate with its certificate and the per-start trace.
pub fn estimate_json(e: &Estimate) -> Value {
    json!({
        "value": e.value,
        "converged": e.converged,
        "exact_seed": e.exact_seed,
        "parties": e.parties,
        "best_by_e_dim": e.best_by_e_dim,
        "improved_at_largest_e": e.improved_at_largest_e(),
        "runs": e.trace.iter().map(run_json).collect::<Vec<_>>(),
        "certificate": candidate_json(&e.certificate),
    })
}

/// Estimate without the certificate matrix, for reports that embed many.
pub fn estimate_summary(e: &Estimate) -> Value {
    json!({
        "value": e.value,
        "converged": e.converged,
        "exact_seed": e.exact_seed,
        "certificate_e_dim": e.certificate.e_dim,
        "certificate_provenance": e.certificate.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(2.0), 2.0);
        assert_eq!(sig12(-1234.56789012345), -1234.56789012);
        assert_eq!(sig12(0.0), 0.0);
    }

    #[test]
    fn digest_depends_on_inputs_only() {
        let a = Report::new("x", &[json!({"generator": "ghz"})], json!({}), json!({}));
        let b = Report::new("y", &[json!({"generator": "ghz"})], json!({"k": 1}), json!({}));
        assert_eq!(a.input_digest, b.input_digest);
    }
}
