//! Self-contained JSON pipeline reports.

use serde::Serialize;
use serde_json::{Map, Value};

/// Key holding the wall-clock time; excluded when comparing replays.
pub const WALL_TIME_KEY: &str = "wall_time_s";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything needed to replay a command and judge its outcome.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub seed: u64,
    pub seed_source: String,
    pub measured: Map<String, Value>,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<String>,
    /// Stage and message of a failed stage, if any.
    pub error: Option<StageError>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

impl Report {
    pub fn new(command: &str, seed: u64, seed_source: &str) -> Self {
        Self {
            command: command.into(),
            seed,
            seed_source: seed_source.into(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.inputs.insert(key.into(), value.into());
    }

    pub fn measure(&mut self, key: &str, value: impl Into<Value>) {
        self.measured.insert(key.into(), value.into());
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// True when no stage failed and every check passed.
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self, wall_time_s: f64) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("report is an object");
        obj.insert("passed".into(), Value::Bool(self.passed()));
        obj.insert(WALL_TIME_KEY.into(), wall_time_s.into());
        v
    }
}

/// JSON number for `x`, or `null` when it is not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
