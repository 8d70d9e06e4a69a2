//! Flat `key = value` configuration with dotted section prefixes.
//!
//! The canonical form is a sorted key/value map; `parse(render(c)) == c`
//! holds exactly. Command-line flags overlay file values, file values
//! overlay per-experiment defaults, and every report embeds the fully
//! resolved map.

use std::collections::BTreeMap;
use std::fmt;

use osd_core::linalg::Mat;
use osd_core::mixing::ProcessSpec;
use osd_core::semigroup::GaussianLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// One experiment per invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SimulateMixing,
    EstimateAlpha,
    CltRun,
    OsdSample,
    ExtractQ,
    Verify,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SimulateMixing => "simulate-mixing",
            Experiment::EstimateAlpha => "estimate-alpha",
            Experiment::CltRun => "clt-run",
            Experiment::OsdSample => "osd-sample",
            Experiment::ExtractQ => "extract-q",
            Experiment::Verify => "verify",
        }
    }

    pub fn from_name(name: &str) -> Option<Experiment> {
        Some(match name {
            "simulate-mixing" => Experiment::SimulateMixing,
            "estimate-alpha" => Experiment::EstimateAlpha,
            "clt-run" => Experiment::CltRun,
            "osd-sample" => Experiment::OsdSample,
            "extract-q" => Experiment::ExtractQ,
            "verify" => Experiment::Verify,
            _ => return None,
        })
    }

    pub fn all() -> &'static [Experiment] {
        &[
            Experiment::SimulateMixing,
            Experiment::EstimateAlpha,
            Experiment::CltRun,
            Experiment::OsdSample,
            Experiment::ExtractQ,
            Experiment::Verify,
        ]
    }
}

/// Resolved run configuration: a canonical sorted key/value map plus typed
/// accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig {
            entries: BTreeMap::new(),
        }
    }

    /// Per-experiment defaults; file and flag values overlay these.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = RunConfig::empty();
        c.set("experiment", experiment.name());
        c.set("seed", "42");
        c.set("dim", "2");
        c.set("out", "out");
        c.set("format", "json");
        match experiment {
            Experiment::SimulateMixing => {
                c.set("replicas", "1000");
                c.set("length", "64");
                c.set("process.kind", "ar1");
                c.set("data_format", "csv");
            }
            Experiment::EstimateAlpha => {
                c.set("dim", "1");
                c.set("replicas", "100000");
                c.set("length", "40");
                c.set("process.kind", "iid");
                c.set("alpha.lags", "1,2,4,8");
                c.set("alpha.directions", "8");
                c.set("alpha.thresholds", "7");
                c.set("alpha.positions", "3");
            }
            Experiment::CltRun => {
                c.set("replicas", "20000");
                c.set("process.kind", "ar1");
                c.set("checkpoints", "256,512,1024,2048,4096,8192,16384");
                c.set("eps.grid", "0.02,0.05,0.1,0.25");
                c.set("delta.levels", "32");
                c.set("block.windows", "8");
                c.set("cf.gaps", "1,4,16");
                c.set("energy.permutations", "200");
                c.set("energy.subsample", "1024");
                c.set("kc.grid_ratio", "1.02");
            }
            Experiment::OsdSample => {
                c.set("bdlp.draws", "100000");
                c.set("bdlp.step", "0.015625");
                c.set("levy.kind", "brownian");
                c.set("q.matrix", "1 0; 0 1");
                c.set("data_format", "csv");
            }
            Experiment::ExtractQ => {
                c.set("track_file", "out/normalizers.json");
                c.set("kc.c_values", "0.9,0.8,0.7");
                c.set("cw.w_values", "0.5,1,2");
                c.set("t.grid", "0.25,0.5,1,2,4");
            }
            Experiment::Verify => {
                c.set("q_file", "out/q.json");
                c.set("bdlp.draws", "20000");
                c.set("bdlp.step", "0.015625");
                c.set("levy.kind", "brownian");
                c.set("t.grid", "1.0");
            }
        }
        c
    }

    /// Parses the flat `key = value` format: one pair per line, `#` starts
    /// a comment, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(
                    &format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(bad(&format!("line {}", lineno + 1), "empty key"));
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(RunConfig { entries })
    }

    /// Canonical rendering: sorted `key = value` lines. `parse` of the
    /// output reproduces the map exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn overlay(&mut self, other: &RunConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        let name = self
            .get("experiment")
            .ok_or_else(|| bad("experiment", "missing"))?;
        Experiment::from_name(name)
            .ok_or_else(|| bad("experiment", format!("unknown experiment `{name}`")))
    }

    pub fn u64_value(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key)
            .ok_or_else(|| bad(key, "missing"))?
            .parse()
            .map_err(|e| bad(key, format!("not an integer: {e}")))
    }

    pub fn usize_value(&self, key: &str) -> Result<usize, ConfigError> {
        self.get(key)
            .ok_or_else(|| bad(key, "missing"))?
            .parse()
            .map_err(|e| bad(key, format!("not an integer: {e}")))
    }

    pub fn f64_value(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self
            .get(key)
            .ok_or_else(|| bad(key, "missing"))?
            .parse()
            .map_err(|e| bad(key, format!("not a number: {e}")))?;
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(v)
    }

    pub fn str_value(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| bad(key, "missing"))
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.str_value(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(key, format!("bad list entry `{s}`: {e}")))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.str_value(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| bad(key, format!("bad list entry `{s}`: {e}")))
            })
            .collect()
    }

    /// Vector: entries separated by commas or spaces.
    pub fn vector(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        parse_vector(self.str_value(key)?).map_err(|r| bad(key, r))
    }

    /// Matrix: rows separated by `;`, entries by commas or spaces.
    pub fn matrix(&self, key: &str) -> Result<Mat, ConfigError> {
        parse_matrix(self.str_value(key)?).map_err(|r| bad(key, r))
    }

    /// Innovation law: `process.innovation.{mean,cov}` with standard-normal
    /// defaults at the given dimension.
    fn innovation(&self, dim: usize) -> Result<GaussianLaw, ConfigError> {
        let mean = match self.get("process.innovation.mean") {
            Some(_) => self.vector("process.innovation.mean")?,
            None => vec![0.0; dim],
        };
        let cov = match self.get("process.innovation.cov") {
            Some(_) => self.matrix("process.innovation.cov")?,
            None => Mat::identity(dim),
        };
        GaussianLaw::new(mean, cov)
            .map_err(|e| bad("process.innovation", format!("invalid law: {e}")))
    }

    /// Process specification from the `process.*` section.
    pub fn process_spec(&self) -> Result<ProcessSpec, ConfigError> {
        let dim = self.usize_value("dim")?;
        if dim == 0 || dim > 10 {
            return Err(bad("dim", "must be in 1..=10"));
        }
        let innovation = self.innovation(dim)?;
        match self.str_value("process.kind")? {
            "iid" => Ok(ProcessSpec::Iid { innovation }),
            "ma" | "ma1" => {
                let coeffs = match self.get("process.coeffs") {
                    Some(raw) => raw
                        .split('|')
                        .map(|m| parse_matrix(m).map_err(|r| bad("process.coeffs", r)))
                        .collect::<Result<Vec<_>, _>>()?,
                    None => vec![Mat::identity(dim), Mat::identity(dim)],
                };
                Ok(ProcessSpec::Ma { coeffs, innovation })
            }
            "ar1" => {
                let transition = match self.get("process.transition") {
                    Some(_) => self.matrix("process.transition")?,
                    None => default_transition(dim),
                };
                Ok(ProcessSpec::Ar1 {
                    transition,
                    innovation,
                })
            }
            other => Err(bad("process.kind", format!("unknown process `{other}`"))),
        }
    }
}

/// Default AR(1) transition: the upper-triangular pair `[[0.5, 0.2], [0, 0.3]]`
/// in dimension two, `0.5 I` otherwise.
pub fn default_transition(dim: usize) -> Mat {
    if dim == 2 {
        Mat::from_rows(&[&[0.5, 0.2], &[0.0, 0.3]])
    } else {
        Mat::identity(dim).scale(0.5)
    }
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    let entries: Vec<f64> = text
        .split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect::<Result<_, _>>()?;
    if entries.is_empty() {
        return Err("empty vector".to_string());
    }
    Ok(entries)
}

pub fn parse_matrix(text: &str) -> Result<Mat, String> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(parse_vector)
        .collect::<Result<_, _>>()?;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err("ragged matrix rows".to_string());
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let r = data.len() / cols;
    Ok(Mat::from_vec(r, cols, data))
}

/// Renders a matrix in the same `;`-rows format the parser accepts.
pub fn render_matrix(m: &Mat) -> String {
    let mut rows = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{}", m[(i, j)])).collect();
        rows.push(row.join(" "));
    }
    rows.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_roundtrip() {
        let text = "# comment\nseed = 7\nprocess.kind = ar1\nprocess.transition = 0.5 0.2; 0 0.3\n";
        let c = RunConfig::parse(text).unwrap();
        let rendered = c.render();
        let back = RunConfig::parse(&rendered).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.get("seed"), Some("7"));
    }

    #[test]
    fn matrix_and_vector_parsing() {
        let m = parse_matrix("0.5 0.2; 0 0.3").unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m[(0, 1)], 0.2);
        assert_eq!(m[(1, 0)], 0.0);
        let v = parse_vector("1, 2, 3").unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
        assert!(parse_matrix("1 2; 3").is_err());
        // Matrix rendering round-trips.
        let back = parse_matrix(&render_matrix(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn overlay_precedence() {
        let mut c = RunConfig::defaults(Experiment::CltRun);
        let mut file = RunConfig::empty();
        file.set("seed", "100");
        c.overlay(&file);
        let mut flags = RunConfig::empty();
        flags.set("seed", "200");
        c.overlay(&flags);
        assert_eq!(c.get("seed"), Some("200"));
        assert_eq!(c.get("process.kind"), Some("ar1"));
    }

    #[test]
    fn process_spec_defaults() {
        let c = RunConfig::defaults(Experiment::CltRun);
        let spec = c.process_spec().unwrap();
        match spec {
            ProcessSpec::Ar1 { transition, .. } => {
                assert_eq!(transition[(0, 0)], 0.5);
                assert_eq!(transition[(0, 1)], 0.2);
            }
            _ => panic!("expected ar1 default"),
        }
    }

    #[test]
    fn bad_values_are_reported_with_keys() {
        let mut c = RunConfig::defaults(Experiment::CltRun);
        c.set("seed", "not-a-number");
        let err = c.u64_value("seed").unwrap_err();
        assert_eq!(err.key, "seed");
    }
}
