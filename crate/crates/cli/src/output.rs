//! The JSON run report and its flat CSV view.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use bicontact_core::report::{CheckRecord, VerificationReport};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scenario::{Expectation, Scenario};
use crate::RunError;

/// Bumped whenever a field of [`RunReport`] changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns of the CSV view, in order.
pub const CSV_COLUMNS: [&str; 11] = [
    "name",
    "passed",
    "margin",
    "threshold",
    "citation",
    "witness_0",
    "witness_1",
    "witness_2",
    "witness_3",
    "detail",
    "scenario",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub scenario: Scenario,
    pub all_passed: bool,
    pub checks: Vec<CheckRecord>,
    pub values: BTreeMap<String, Value>,
    /// The only field that differs between identical runs.
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(scenario: Scenario, mut report: VerificationReport, wall_time_seconds: f64) -> Self {
        for e in &scenario.expect {
            report.push(expectation_record(e, report.values.get(&e.key)));
        }
        Self {
            schema_version: SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            all_passed: report.passed(),
            checks: report.checks,
            values: report.values,
            scenario,
            wall_time_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are plain data")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), RunError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| RunError::Output(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let file = std::fs::File::create(path).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        let label = self.scenario.name.clone().unwrap_or_else(|| self.scenario.kind.as_str().to_string());
        emit_csv(&self.checks, &label, file).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))
    }
}

/// Write one row per check, header first. Witnesses longer than four
/// coordinates are truncated; missing coordinates are empty cells.
pub fn emit_csv<W: Write>(checks: &[CheckRecord], scenario: &str, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for c in checks {
        let mut row: Vec<String> = vec![
            c.name.clone(),
            c.passed.to_string(),
            format!("{:e}", c.margin),
            format!("{:e}", c.threshold),
            c.citation.clone(),
        ];
        for k in 0..4 {
            row.push(c.witness.as_ref().and_then(|w| w.get(k)).map(|x| format!("{x:e}")).unwrap_or_default());
        }
        row.push(c.detail.clone().unwrap_or_default());
        row.push(scenario.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn numbers_match(got: f64, want: f64, e: &Expectation) -> bool {
    match (e.tol, e.rel_tol) {
        (None, None) => got == want,
        (tol, rel) => {
            let bound = tol.unwrap_or(0.0).max(rel.unwrap_or(0.0) * want.abs());
            (got - want).abs() <= bound
        }
    }
}

fn matches(got: &Value, want: &toml::Value, e: &Expectation) -> bool {
    match (got, want) {
        (Value::Number(g), toml::Value::Integer(w)) => g.as_f64().is_some_and(|g| numbers_match(g, *w as f64, e)),
        (Value::Number(g), toml::Value::Float(w)) => g.as_f64().is_some_and(|g| numbers_match(g, *w, e)),
        (Value::String(g), toml::Value::String(w)) => g == w,
        (Value::Bool(g), toml::Value::Boolean(w)) => g == w,
        (Value::Array(g), toml::Value::Array(w)) => {
            g.len() == w.len() && g.iter().zip(w).all(|(g, w)| matches(g, w, e))
        }
        _ => false,
    }
}

fn expectation_record(e: &Expectation, got: Option<&Value>) -> CheckRecord {
    let name = format!("expect:{}", e.key);
    let ok = got.is_some_and(|g| matches(g, &e.value, e));
    let got = got.map_or_else(|| "missing".to_string(), |g| g.to_string());
    CheckRecord::boolean(name, "scenario expectation", ok).with_detail(format!("got {got}, expected {}", e.value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_check_list_gives_header_only() {
        let mut buf = Vec::new();
        emit_csv(&[], "x", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("name,passed,margin,threshold,citation,witness_0"));
    }

    #[test]
    fn tolerance_rules() {
        let e = |tol, rel_tol| Expectation { key: "k".into(), value: toml::Value::Float(1.0), tol, rel_tol };
        assert!(matches(&serde_json::json!(1.0), &toml::Value::Float(1.0), &e(None, None)));
        assert!(!matches(&serde_json::json!(1.0001), &toml::Value::Float(1.0), &e(None, None)));
        assert!(matches(&serde_json::json!(1.0001), &toml::Value::Float(1.0), &e(Some(1e-3), None)));
        assert!(matches(&serde_json::json!(1.01), &toml::Value::Float(1.0), &e(None, Some(0.02))));
        assert!(matches(&serde_json::json!(-4), &toml::Value::Integer(-4), &e(None, None)));
        assert!(matches(
            &serde_json::json!([0.0, 0.25]),
            &toml::Value::Array(vec![toml::Value::Float(0.0), toml::Value::Float(0.25)]),
            &e(Some(1e-6), None)
        ));
        assert!(!matches(&serde_json::json!(null), &toml::Value::Integer(-4), &e(None, None)));
    }
}
