//! Structured pass/fail records shared by every verification routine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One named check. `passed` is always `margin > threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub threshold: f64,
    /// Chart coordinates of the worst sample, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    pub citation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, citation: impl Into<String>, margin: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            // NaN margins fail.
            passed: margin > threshold,
            margin,
            threshold,
            witness: None,
            citation: citation.into(),
            detail: None,
        }
    }

    /// A yes/no check encoded as margin ±1 against threshold 0.
    pub fn boolean(name: impl Into<String>, citation: impl Into<String>, ok: bool) -> Self {
        Self::new(name, citation, if ok { 1.0 } else { -1.0 }, 0.0)
    }

    /// `residual < tolerance`, encoded as margin `tolerance − residual`.
    pub fn below(name: impl Into<String>, citation: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let mut r = Self::new(name, citation, tolerance - residual, 0.0);
        r.detail = Some(format!("residual {residual:.3e}, tolerance {tolerance:.1e}"));
        r
    }

    pub fn with_witness(mut self, point: impl Into<Vec<f64>>) -> Self {
        self.witness = Some(point.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// A list of checks plus named scalar outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
    #[serde(default)]
    pub values: BTreeMap<String, serde_json::Value>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn set_value(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values are plain data");
        self.values.insert(key.into(), v);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.values.extend(other.values);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_tracks_margin() {
        assert!(CheckRecord::new("a", "", 0.1, 0.0).passed);
        assert!(!CheckRecord::new("a", "", 0.0, 0.0).passed);
        assert!(!CheckRecord::new("a", "", f64::NAN, 0.0).passed);
        assert!(CheckRecord::below("r", "", 1e-12, 1e-10).passed);
        assert!(!CheckRecord::boolean("b", "", false).passed);
    }

    #[test]
    fn empty_report_passes() {
        assert!(VerificationReport::new().passed());
    }
}
