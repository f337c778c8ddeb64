use anyhow::{bail, ensure, Context};
use serde_json::Value;

use crate::args::RunConfig;
use crate::run::SCHEMA;

const CHECK_KEYS: [&str; 7] = ["name", "value", "margin", "scale", "tolerance", "status", "reason"];

fn number_or_null(v: &Value) -> bool {
    v.is_number() || v.is_null()
}

fn validate_check(entry: &Value, i: usize) -> anyhow::Result<()> {
    let obj = entry.as_object().with_context(|| format!("check {i} is not an object"))?;
    for key in CHECK_KEYS {
        ensure!(obj.contains_key(key), "check {i} lacks `{key}`");
    }
    if let Some(extra) = obj.keys().find(|k| !CHECK_KEYS.contains(&k.as_str())) {
        bail!("check {i} has unknown field `{extra}`");
    }
    ensure!(obj["name"].is_string(), "check {i}: `name` must be a string");
    for key in ["value", "margin", "scale"] {
        ensure!(number_or_null(&obj[key]), "check {i}: `{key}` must be a number or null");
    }
    ensure!(obj["tolerance"].is_number(), "check {i}: `tolerance` must be a number");
    let status = obj["status"].as_str().unwrap_or_default();
    ensure!(
        matches!(status, "pass" | "fail" | "skipped"),
        "check {i}: status `{}` is not pass, fail or skipped",
        obj["status"]
    );
    ensure!(obj["reason"].is_string() || obj["reason"].is_null(), "check {i}: `reason` must be a string or null");
    if status == "skipped" {
        ensure!(obj["reason"].is_string(), "check {i}: skipped without a reason");
    } else {
        ensure!(!obj["margin"].is_null(), "check {i}: evaluated without a margin");
    }
    Ok(())
}

/// Structural validation of a report.
pub fn validate(report: &Value) -> anyhow::Result<()> {
    ensure!(report.is_object(), "report is not a JSON object");
    ensure!(
        report["schema"].as_u64() == Some(SCHEMA as u64),
        "report schema is {}, expected {SCHEMA}",
        report["schema"]
    );
    ensure!(report["tool"] == "freebound", "report was not written by freebound");
    ensure!(report["version"].is_string(), "report has no version");
    let run: RunConfig =
        serde_json::from_value(report["run"].clone()).context("report has no valid run configuration")?;
    ensure!(report["version"] == run.version.as_str(), "report and run versions disagree");
    if let Some(geometry) = report.get("geometry") {
        let checks = geometry["checks"].as_array().context("geometry section has no checks")?;
        for (i, c) in checks.iter().enumerate() {
            validate_check(c, i)?;
        }
    }
    if let Some(spectrum) = report.get("spectrum") {
        let values = spectrum["eigenvalues"].as_array().context("spectrum has no eigenvalues")?;
        ensure!(values.iter().all(Value::is_number), "eigenvalues must be numbers");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn check(status: &str, reason: Value) -> Value {
        json!({"name": "x", "value": 1.0, "margin": 0.5, "scale": 1.0, "tolerance": 0.0, "status": status, "reason": reason})
    }

    #[test]
    fn check_entries() {
        assert!(validate_check(&check("pass", Value::Null), 0).is_ok());
        assert!(validate_check(&check("skipped", Value::Null), 0).is_err());
        assert!(validate_check(&check("skipped", json!("gate")), 0).is_ok());
        assert!(validate_check(&check("maybe", Value::Null), 0).is_err());
        let mut extra = check("pass", Value::Null);
        extra["extra"] = json!(1);
        assert!(validate_check(&extra, 0).is_err());
    }

    #[test]
    fn envelope_fields() {
        assert!(validate(&json!({"schema": 2})).is_err());
        assert!(validate(&json!({"schema": 1, "tool": "freebound", "version": "0.1.0"})).is_err());
    }
}
