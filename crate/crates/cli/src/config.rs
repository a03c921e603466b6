//! Flat `key = value` run configuration with namespaced keys.

use std::collections::BTreeMap;
use std::path::Path;

use hardyflow_core::{MeshSpec, OmegaOptions, ProblemParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    OptFloat,
    Count,
    Text,
}

/// Every accepted key with its default.
const KEYS: &[(&str, Kind, &str)] = &[
    ("problem.N", Kind::Count, "3"),
    ("problem.R", Kind::Float, "1"),
    ("problem.r_in", Kind::Float, "0"),
    ("problem.mu", Kind::Float, "0.25"),
    ("problem.gamma", Kind::Float, "1"),
    ("problem.lambda", Kind::OptFloat, ""),
    ("problem.lambda_offset", Kind::OptFloat, ""),
    ("mesh.M", Kind::Count, "512"),
    ("mesh.grading", Kind::Float, "0.75"),
    ("eigen.tol", Kind::Float, "1e-12"),
    ("newton.tol", Kind::Float, "1e-12"),
    ("branch.delta_min", Kind::Float, "1e-4"),
    ("evolve.record_every", Kind::Count, "1"),
    ("omega.stall_tol", Kind::Float, "1e-9"),
    ("omega.class_tol", Kind::Float, "1e-6"),
    ("omega.t_cap", Kind::Float, "1e4"),
    ("omega.dt0", Kind::Float, "1e-2"),
    ("omega.dt_max", Kind::Float, "1"),
    ("mu_limit.levels", Kind::Count, "3"),
    ("output.dir", Kind::Text, "out"),
];

fn kind(key: &str) -> Option<Kind> {
    KEYS.iter().find(|k| k.0 == key).map(|k| k.1)
}

/// Fully resolved configuration: defaults overlaid by file lines and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: KEYS
                .iter()
                .map(|(k, _, d)| (k.to_string(), d.to_string()))
                .collect(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Config::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(CliError::usage(format!(
                    "line {}: duplicate key {k}",
                    n + 1
                )));
            }
            cfg.set(k, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> CliResult<Self> {
        let mut cfg = Config::default();
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Sets one key after checking its name and type.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let kind = kind(key).ok_or_else(|| CliError::usage(format!("unknown config key {key}")))?;
        let bad = || CliError::usage(format!("bad value {value:?} for {key}"));
        match kind {
            Kind::Float => {
                value.parse::<f64>().map_err(|_| bad())?;
            }
            Kind::OptFloat if !value.is_empty() => {
                value.parse::<f64>().map_err(|_| bad())?;
            }
            Kind::Count => {
                value.parse::<usize>().map_err(|_| bad())?;
            }
            _ => {}
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn float(&self, key: &str) -> f64 {
        self.raw(key).parse().unwrap_or(f64::NAN)
    }

    pub fn opt_float(&self, key: &str) -> Option<f64> {
        let r = self.raw(key);
        (!r.is_empty()).then(|| r.parse().unwrap_or(f64::NAN))
    }

    pub fn count(&self, key: &str) -> usize {
        self.raw(key).parse().unwrap_or(0)
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    /// Problem parameters with `lambda` left at 0; see [`Config::lambda_rule`].
    pub fn params(&self) -> CliResult<ProblemParams> {
        let mu = self.float("problem.mu");
        let p = ProblemParams {
            dim: self.count("problem.N"),
            outer_radius: self.float("problem.R"),
            inner_radius: self.float("problem.r_in"),
            mu,
            gamma: self.float("problem.gamma"),
            lambda: 0.0,
            validation_mode: mu == 0.0,
        };
        p.check()?;
        Ok(p)
    }

    pub fn mesh(&self) -> CliResult<MeshSpec> {
        let m = self.count("mesh.M");
        if m < 2 {
            return Err(CliError::usage("mesh.M must be at least 2"));
        }
        Ok(MeshSpec::new(m, self.float("mesh.grading")))
    }

    /// Absolute `lambda` or an offset from the principal eigenvalue.
    pub fn lambda_rule(&self) -> CliResult<LambdaRule> {
        match (
            self.opt_float("problem.lambda"),
            self.opt_float("problem.lambda_offset"),
        ) {
            (Some(_), Some(_)) => Err(CliError::usage(
                "set only one of problem.lambda and problem.lambda_offset",
            )),
            (Some(l), None) => Ok(LambdaRule::Absolute(l)),
            (None, Some(d)) => Ok(LambdaRule::AboveOnset(d)),
            (None, None) => Err(CliError::usage(
                "this command needs problem.lambda or problem.lambda_offset",
            )),
        }
    }

    pub fn omega_options(&self) -> OmegaOptions {
        OmegaOptions {
            stall_tol: self.float("omega.stall_tol"),
            class_tol: self.float("omega.class_tol"),
            t_cap: self.float("omega.t_cap"),
            dt0: self.float("omega.dt0"),
            dt_max: self.float("omega.dt_max"),
        }
    }

    /// Tolerance keys, recorded separately in manifests.
    pub fn tolerances(&self) -> BTreeMap<String, f64> {
        self.values
            .keys()
            .filter(|k| k.ends_with("tol"))
            .map(|k| (k.clone(), self.float(k)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Absolute(f64),
    AboveOnset(f64),
}

impl LambdaRule {
    pub fn resolve(self, lambda_1: f64) -> f64 {
        match self {
            LambdaRule::Absolute(l) => l,
            LambdaRule::AboveOnset(d) => lambda_1 + d,
        }
    }
}
