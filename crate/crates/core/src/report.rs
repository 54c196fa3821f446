//! Residual records, run configuration and the JSON report.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// One verified identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub residual: f64,
    pub samples: usize,
    pub fd_step: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

impl Residual {
    /// A NaN residual never passes.
    pub fn new(name: impl Into<String>, residual: f64, samples: usize, fd_step: Option<f64>, tol: f64) -> Self {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        Residual {
            name: name.into(),
            residual,
            samples,
            fd_step,
            tol,
            pass: residual <= tol,
        }
    }

    /// A check where larger is fine: passes iff `value ≥ floor`. Stored as floor − value.
    pub fn at_least(name: impl Into<String>, value: f64, floor: f64, samples: usize) -> Self {
        Residual::new(name, (floor - value).max(0.0), samples, None, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub residuals: Vec<Residual>,
    /// Caveats about what the suite does not cover.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SuiteResult {
    pub fn new(name: impl Into<String>, residuals: Vec<Residual>) -> Self {
        SuiteResult {
            name: name.into(),
            pass: residuals.iter().all(|r| r.pass),
            residuals,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Wall time is kept out of the serialized form so that reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub config: RunConfig,
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(config: RunConfig, suites: Vec<SuiteResult>, wall_time_s: f64) -> Self {
        Report {
            schema: 1,
            pass: suites.iter().all(|s| s.pass),
            config,
            suites,
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Tolerances of the individual check families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub exact: f64,
    pub fd: f64,
    pub composed: f64,
    pub hopf: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-9,
            fd: 1e-6,
            composed: 1e-4,
            hopf: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub fd_step: f64,
    pub fd_step_composed: f64,
    pub test_functions: usize,
    pub tol: Tolerances,
    pub grid: usize,
    pub measure_samples: usize,
    /// A single (M, δ, ε) for the measure suite in place of the default grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<[f64; 3]>,
    pub suites: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            seed: 1,
            samples: 100,
            fd_step: 1e-5,
            fd_step_composed: 1e-4,
            test_functions: 5,
            tol: Tolerances::default(),
            grid: 16,
            measure_samples: 100_000,
            measure: None,
            suites: vec!["all".into()],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.samples < 1 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 1e-2) {
            return Err(Error::Config("fd_step must lie in (0, 1e-2]".into()));
        }
        if !(self.fd_step_composed > 0.0 && self.fd_step_composed <= 1e-1) {
            return Err(Error::Config("fd_step_composed must lie in (0, 1e-1]".into()));
        }
        if self.test_functions < 1 {
            return Err(Error::Config("test_functions must be at least 1".into()));
        }
        if self.grid < 4 || self.grid % 2 != 0 {
            return Err(Error::Config("grid must be an even number >= 4".into()));
        }
        if self.measure_samples < 100 {
            return Err(Error::Config("measure_samples must be at least 100".into()));
        }
        if let Some([m, delta, eps]) = self.measure {
            if !(m > 1.0 && 0.0 < eps && eps < delta && delta < 1.0) {
                return Err(Error::Config("measure needs M > 1 and 0 < eps < delta < 1".into()));
            }
        }
        for t in [self.tol.exact, self.tol.fd, self.tol.composed, self.tol.hopf] {
            if !(t > 0.0) {
                return Err(Error::Config("tolerances must be positive".into()));
            }
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value for {key}: {v}")))
        }
        match key {
            "n" => self.n = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "fd_step" | "fd-step" => self.fd_step = num(key, value)?,
            "fd_step_composed" | "fd-step-composed" => self.fd_step_composed = num(key, value)?,
            "test_functions" | "test-functions" => self.test_functions = num(key, value)?,
            "grid" => self.grid = num(key, value)?,
            "measure_samples" | "measure-samples" => self.measure_samples = num(key, value)?,
            "tol_exact" | "tol-exact" => self.tol.exact = num(key, value)?,
            "tol_fd" | "tol-fd" => self.tol.fd = num(key, value)?,
            "tol_composed" | "tol-composed" => self.tol.composed = num(key, value)?,
            "tol_hopf" | "tol-hopf" => self.tol.hopf = num(key, value)?,
            "measure" => self.measure = Some(RunConfig::parse_measure(value)?),
            "suite" | "suites" => {
                self.suites = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            _ => return Err(Error::Config(format!("unknown key: {key}"))),
        }
        Ok(())
    }

    /// Parses `M=10 delta=0.5 eps=0.05` (separators: spaces or commas).
    pub fn parse_measure(text: &str) -> Result<[f64; 3]> {
        let mut out = [f64::NAN; 3];
        for part in text.split([' ', ',']).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("measure: expected key=value, got {part}")))?;
            let slot = match k.trim() {
                "M" | "m" => 0,
                "delta" => 1,
                "eps" => 2,
                other => return Err(Error::Config(format!("measure: unknown key {other}"))),
            };
            out[slot] = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("measure: bad number {v}")))?;
        }
        if out.iter().any(|x| x.is_nan()) {
            return Err(Error::Config("measure needs M, delta and eps".into()));
        }
        Ok(out)
    }

    /// Parses flat `key = value` lines; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (k, v) in RunConfig::parse_kv(&text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }
}
