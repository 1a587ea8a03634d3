//! Flat `key=value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. `--set key=value` overrides are applied after the file, in
//! order. `n` and `alphas` take comma separated lists.

use std::fmt;
use std::path::{Path, PathBuf};

use dualprox::{Discretization, InexactRule, ProblemKind, ProblemSpec64, SolverConfig64};

/// Meshes finer than this need `--allow-large`.
pub const MAX_DEFAULT_N: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line in the config file; `None` for `--set` overrides and
    /// whole-config checks.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KEYS: &[&str] = &[
    "problem",
    "n",
    "alpha",
    "beta",
    "R",
    "mode",
    "sigma",
    "backtrack",
    "eta",
    "tau",
    "delta_tol",
    "inexact_rule",
    "globalized",
    "alphas",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Meshes; a single solve uses the first entry.
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    /// `None` keeps the problem's own default.
    pub beta: Option<f64>,
    pub r: Option<f64>,
    pub mode: Discretization,
    pub solver: SolverConfig64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Example1,
            ns: vec![32],
            alpha: 1e-5,
            alphas: vec![1e-4, 1e-5, 1e-6, 1e-7],
            beta: None,
            r: None,
            mode: Discretization::P0,
            solver: SolverConfig64::default(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at(None, format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line).ok_or_else(|| ConfigError::at(Some(i + 1), format!("expected key=value, got '{line}'")))?;
            self.set(k, v).map_err(|m| ConfigError::at(Some(i + 1), m))?;
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = split_pair(pair).ok_or_else(|| ConfigError::at(None, format!("--set expects key=value, got '{pair}'")))?;
        self.set(k, v).map_err(|m| ConfigError::at(None, format!("--set {pair}: {m}")))
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let s = &mut self.solver;
        match key {
            "problem" => self.problem = value.parse().map_err(|e| format!("{e}"))?,
            "n" => self.ns = parse_list(value, parse_usize)?,
            "alpha" => self.alpha = parse_f64(value)?,
            "alphas" => self.alphas = parse_list(value, parse_f64)?,
            "beta" => self.beta = Some(parse_f64(value)?),
            "R" => self.r = Some(parse_f64(value)?),
            "mode" => self.mode = parse_mode(value)?,
            "sigma" => s.sigma = parse_f64(value)?,
            "backtrack" => s.backtrack = parse_f64(value)?,
            "eta" => s.eta = parse_f64(value)?,
            "tau" => s.tau = parse_f64(value)?,
            "delta_tol" => s.delta_tol = parse_f64(value)?,
            "inexact_rule" => s.inexact_rule = parse_rule(value)?,
            "globalized" => s.globalized = parse_bool(value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key '{key}' (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self, allow_large: bool) -> Result<(), ConfigError> {
        let err = |m: String| ConfigError::at(None, m);
        if self.ns.is_empty() {
            return Err(err("n needs at least one value".into()));
        }
        if self.alphas.is_empty() {
            return Err(err("alphas needs at least one value".into()));
        }
        for &n in &self.ns {
            if n < 2 {
                return Err(err(format!("n = {n} is too coarse, need n >= 2")));
            }
            if n > MAX_DEFAULT_N && !allow_large {
                return Err(err(format!("n = {n} exceeds {MAX_DEFAULT_N}; pass --allow-large to run it")));
            }
        }
        for &a in std::iter::once(&self.alpha).chain(&self.alphas) {
            if !(a > 0.0 && a.is_finite()) {
                return Err(err(format!("alpha must be positive, got {a}")));
            }
        }
        for (name, v) in [("beta", self.beta), ("R", self.r)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(err(format!("{name} must be nonnegative, got {v}")));
                }
            }
        }
        self.solver.validate().map_err(|e| err(e.to_string()))
    }

    /// Largest mesh in the config; used for the large-mesh warning.
    pub fn max_n(&self) -> usize {
        self.ns.iter().copied().max().unwrap_or(0)
    }

    pub fn spec(&self, n: usize, alpha: f64) -> ProblemSpec64 {
        let mut spec = ProblemSpec64::new(self.problem, n, alpha);
        spec.mode = self.mode;
        if let Some(b) = self.beta {
            spec.beta = b;
        }
        if let Some(r) = self.r {
            spec.r = r;
        }
        spec
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("'{v}' is not a nonnegative integer"))
}

fn parse_list<T>(v: &str, item: fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

pub fn parse_mode(v: &str) -> Result<Discretization, String> {
    match v.to_ascii_lowercase().as_str() {
        "p0" => Ok(Discretization::P0),
        "variational" | "var" => Ok(Discretization::Variational),
        _ => Err(format!("mode must be p0 or variational, got '{v}'")),
    }
}

fn parse_rule(v: &str) -> Result<InexactRule, String> {
    match v.to_ascii_lowercase().as_str() {
        "forcing" => Ok(InexactRule::Forcing),
        "capped" => Ok(InexactRule::Capped),
        _ => Err(format!("inexact_rule must be forcing or capped, got '{v}'")),
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}
