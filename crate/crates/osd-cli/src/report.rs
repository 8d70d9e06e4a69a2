//! JSON report schema shared by every experiment.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::RunConfig;

/// One pass/fail criterion with its observed value and threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Flag {
    /// `value <= threshold` passes.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Flag {
        Flag {
            name: name.to_string(),
            pass: value <= threshold,
            value,
            threshold,
        }
    }

    /// `value >= threshold` passes.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Flag {
        Flag {
            name: name.to_string(),
            pass: value >= threshold,
            value,
            threshold,
        }
    }

    pub fn boolean(name: &str, pass: bool) -> Flag {
        Flag {
            name: name.to_string(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}

/// Report document: `{experiment, config, metrics, flags, pass, version}`.
///
/// Serialization is deterministic: the config map and the metrics map are
/// both sorted, and floats print in shortest round-trip form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub metrics: Map<String, Value>,
    pub flags: Vec<Flag>,
    pub pass: bool,
    pub version: String,
}

impl Report {
    pub fn new(config: &RunConfig, experiment: &str) -> Report {
        Report {
            experiment: experiment.to_string(),
            config: config.entries().clone(),
            metrics: Map::new(),
            flags: Vec::new(),
            pass: true,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn insert_metric(&mut self, key: &str, value: Value) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn push_flag(&mut self, flag: Flag) {
        self.pass &= flag.pass;
        self.flags.push(flag);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn flags_drive_pass() {
        let c = RunConfig::defaults(Experiment::EstimateAlpha);
        let mut r = Report::new(&c, "estimate-alpha");
        r.push_flag(Flag::at_most("alpha", 0.005, 0.01));
        assert!(r.pass);
        r.push_flag(Flag::at_least("margin", -1.0, 0.0));
        assert!(!r.pass);
    }

    #[test]
    fn serialization_is_deterministic() {
        let c = RunConfig::defaults(Experiment::CltRun);
        let mut r = Report::new(&c, "clt-run");
        r.insert_metric("zeta", serde_json::json!(1.5));
        r.insert_metric("alpha", serde_json::json!([1.0, 2.0]));
        let a = r.to_json();
        let b = r.to_json();
        assert_eq!(a, b);
        // Sorted metric keys.
        assert!(a.find("\"alpha\"").unwrap() < a.find("\"zeta\"").unwrap());
    }
}
