//! Machine-readable run reports.

use super::config::{RunConfig, SCHEMA_VERSION};
use super::HarnessError;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// value ≤ tolerance
    AtMost,
    /// value ≥ tolerance
    AtLeast,
    /// pass/fail flag; value is 1 or 0
    Flag,
}

/// One named, thresholded quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Non-finite values serialise as null.
    #[serde(deserialize_with = "null_as_nan")]
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtMost,
            passed: value <= tolerance,
            detail: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
            passed: value >= tolerance,
            detail: None,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            comparison: Comparison::Flag,
            passed: ok,
            detail: None,
        }
    }

    /// Every entry of `values` must reach `min`.
    pub fn all_at_least(name: impl Into<String>, values: &[f64], min: f64) -> Self {
        let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut c = Self::at_least(name, worst, min);
        c.passed &= !values.is_empty();
        c.with_detail(format!("{values:.4?}"))
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CriterionResult {
    pub fn new(id: u8, title: &str, checks: Vec<Check>) -> Self {
        Self {
            id,
            title: title.into(),
            passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
            checks,
            seconds: None,
            note: None,
        }
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// `PASS  3  title` or `FAIL  9  title  [failing check names]`.
    pub fn line(&self) -> String {
        if self.passed {
            format!("PASS {:>2}  {}", self.id, self.title)
        } else {
            let names: Vec<&str> = self.failing().iter().map(|c| c.name.as_str()).collect();
            format!("FAIL {:>2}  {}  [{}]", self.id, self.title, names.join(", "))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: RunConfig,
    pub deterministic: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    pub passed: bool,
    /// Omitted in deterministic runs so reports compare byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn new(subcommand: &str, config: &RunConfig, deterministic: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: config.clone(),
            deterministic,
            checks: Vec::new(),
            criteria: Vec::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
            passed: true,
            wall_time_s: None,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    /// Recomputes the overall verdict from checks and criteria.
    pub fn finish(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed) && self.criteria.iter().all(|c| c.passed);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    /// 0 when everything passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare_as_named() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::at_least("b", 2.0, 1.0).passed);
        assert!(!Check::all_at_least("c", &[], 1.0).passed);
        assert!(!Check::all_at_least("c", &[2.0, 0.5], 1.0).passed);
    }

    #[test]
    fn report_roundtrips_and_omits_timing() {
        let mut r = RunReport::new("verify", &RunConfig::default(), true);
        r.push(Check::at_most("x", 2.0, 1.0));
        r.criteria.push(CriterionResult::new(1, "t", vec![Check::flag("ok", true)]));
        r.finish();
        assert!(!r.passed);
        assert_eq!(r.exit_code(), 1);
        let j = r.to_json();
        assert!(!j.contains("wall_time_s"));
        let back: RunReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);
        assert!(r.criteria[0].line().starts_with("PASS  1"));
        r.push(Check::at_least("order", f64::INFINITY, 1.8));
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert!(back.checks[1].value.is_nan());
    }
}
