//! Run configuration shared by the command-line subcommands.
//!
//! A configuration file is flat `key = value` text; `#` starts a comment.
//! Parameters use `param.<name> = value` or `param = name=value`. Keys
//! applied later override earlier ones, so flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::asymptotics::EpsilonSchedule;
use crate::chart::{check_dim, hyperbolic_metric};
use crate::error::{Error, Result};
use crate::families::{aspect_perturbation, schwarzschild_ads, AspectProfile};
use crate::harmonics::Chi;
use crate::mass::MassOptions;
use crate::metric::MetricField;
use crate::quadrature::{sphere_quadrature, QuadratureRule};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteSelection {
    Tractor,
    Michel,
    Both,
}

impl std::str::FromStr for RouteSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tractor" => Ok(Self::Tractor),
            "michel" => Ok(Self::Michel),
            "both" => Ok(Self::Both),
            other => Err(invalid("route", format!("expected tractor, michel or both, got '{other}'"))),
        }
    }
}

/// Families accepted by `family`.
pub const FAMILIES: [&str; 4] = ["hyperbolic", "schwarzschild-ads", "aspect-perturbation", "custom"];

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass = 0,
    Fail = 1,
    Inconclusive = 2,
    ConfigError = 64,
}

impl Outcome {
    /// Exit status for an error that aborted a run.
    pub fn of_error(err: &Error) -> Self {
        match err {
            Error::InvalidParameter { .. }
            | Error::InvalidSchedule(_)
            | Error::UnsupportedDimension(_)
            | Error::UnsupportedSphere(_)
            | Error::InvalidLevel(_)
            | Error::NegativeMass(_)
            | Error::HorizonInShell { .. }
            | Error::NotPositiveDefinite(_)
            | Error::Harmonics(_) => Outcome::ConfigError,
            Error::Inconclusive(_) => Outcome::Inconclusive,
            _ => Outcome::Fail,
        }
    }

    pub fn code(self) -> i32 {
        self as i32
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(field, format!("cannot parse '{value}'")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    pub family: String,
    pub params: BTreeMap<String, String>,
    pub chi: Option<PathBuf>,
    pub route: RouteSelection,
    pub level: usize,
    pub schedule: EpsilonSchedule,
    /// Cross-route relative tolerance.
    pub tol: f64,
    pub extraction_tol: f64,
    pub out: Option<PathBuf>,
    pub aspect_csv: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            family: "hyperbolic".to_string(),
            params: BTreeMap::new(),
            chi: None,
            route: RouteSelection::Both,
            level: 3,
            schedule: EpsilonSchedule::default(),
            tol: 1e-3,
            extraction_tol: 1e-6,
            out: None,
            aspect_csv: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if let Some(name) = key.strip_prefix("param.") {
            return self.set_param(name, value);
        }
        match key {
            "dim" => self.dim = parse_num(key, value)?,
            "family" => self.family = value.to_string(),
            "param" => {
                let (k, v) = value
                    .split_once('=')
                    .ok_or_else(|| invalid("param", format!("expected name=value, got '{value}'")))?;
                self.set_param(k.trim(), v.trim())?;
            }
            "chi" => self.chi = Some(PathBuf::from(value)),
            "route" => self.route = value.parse()?,
            "level" => self.level = parse_num(key, value)?,
            "eps0" => self.schedule.eps0 = parse_num(key, value)?,
            "ratio" => self.schedule.ratio = parse_num(key, value)?,
            "count" => self.schedule.count = parse_num(key, value)?,
            "stages" => self.schedule.stages = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "extraction_tol" | "extraction-tol" => self.extraction_tol = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "aspect_csv" | "aspect-csv" => self.aspect_csv = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_num(key, value)?,
            other => return Err(invalid(other, "unknown configuration key")),
        }
        Ok(())
    }

    fn set_param(&mut self, name: &str, value: &str) -> Result<()> {
        if name.is_empty() {
            return Err(invalid("param", "empty parameter name"));
        }
        self.params.insert(name.to_string(), value.to_string());
        Ok(())
    }

    /// Apply every setting of a flat key-value text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                invalid("config", format!("line {}: expected key = value, got '{line}'", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("config", format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn options(&self) -> MassOptions {
        MassOptions {
            schedule: self.schedule,
            extraction_tol: self.extraction_tol,
        }
    }

    /// Check every field; the first problem is reported by field name.
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim).map_err(|_| invalid("dim", format!("{} is outside 3..=6", self.dim)))?;
        if !FAMILIES.contains(&self.family.as_str()) {
            return Err(invalid("family", format!("unknown family '{}', expected one of {FAMILIES:?}", self.family)));
        }
        if self.level == 0 || self.level > 8 {
            return Err(invalid("level", format!("{} is outside 1..=8", self.level)));
        }
        self.schedule.validate().map_err(|e| invalid("schedule", e.to_string()))?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", "must be positive"));
        }
        if !(self.extraction_tol > 0.0 && self.extraction_tol.is_finite()) {
            return Err(invalid("extraction_tol", "must be positive"));
        }
        let allowed: &[&str] = match self.family.as_str() {
            "hyperbolic" => &[],
            "schwarzschild-ads" => &["m"],
            "aspect-perturbation" => &["amp", "profile", "order", "c0", "c"],
            _ => &["m", "amp", "profile", "order", "c0", "c"],
        };
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(invalid(
                &format!("param.{k}"),
                format!("not a parameter of family '{}' (allowed: {allowed:?})", self.family),
            ));
        }
        if self.chi.is_some() && !matches!(self.family.as_str(), "aspect-perturbation" | "custom") {
            return Err(invalid("chi", "only aspect-perturbation and custom families take chi"));
        }
        self.build_metric().map(|_| ())
    }

    fn param_f64(&self, name: &str) -> Result<Option<f64>> {
        self.params
            .get(name)
            .map(|v| parse_num::<f64>(&format!("param.{name}"), v))
            .transpose()
    }

    /// The boundary function `χ`: the `chi` file if given, else `c0 + c·ω`
    /// from parameters (default `χ ≡ 1`), scaled by `amp`.
    pub fn chi(&self) -> Result<Chi> {
        let n = self.dim;
        let base = match &self.chi {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("chi", format!("cannot read {}: {e}", path.display())))?;
                parse_chi(n, &text)?
            }
            None => {
                let c0 = self.param_f64("c0")?.unwrap_or(1.0);
                let c = match self.params.get("c") {
                    Some(list) => {
                        let vals: Vec<f64> = list
                            .split(',')
                            .map(|s| parse_num::<f64>("param.c", s))
                            .collect::<Result<_>>()?;
                        if vals.len() != n {
                            return Err(invalid("param.c", format!("expected {n} comma-separated values, got {}", vals.len())));
                        }
                        Vector::from_vec(vals)
                    }
                    None => Vector::zeros(n),
                };
                Chi::Affine { c0, c }
            }
        };
        let amp = self.param_f64("amp")?.unwrap_or(1.0);
        Ok(base.scaled(amp))
    }

    fn profile(&self) -> Result<AspectProfile> {
        self.params.get("profile").map(|p| p.parse()).transpose().map(|p| p.unwrap_or(AspectProfile::Trace))
    }

    /// The metric `h` compared against the hyperbolic background.
    pub fn build_metric(&self) -> Result<MetricField> {
        let n = self.dim;
        let schwarzschild = || -> Result<MetricField> {
            let m = self.param_f64("m")?.unwrap_or(0.0);
            schwarzschild_ads(n, m)
        };
        let aspect = || -> Result<MetricField> {
            let order = self.param_f64("order")?;
            aspect_perturbation(n, &self.chi()?, self.profile()?, order)
        };
        let mut h = match self.family.as_str() {
            "hyperbolic" => hyperbolic_metric(n)?,
            "schwarzschild-ads" => schwarzschild()?,
            "aspect-perturbation" => aspect()?,
            "custom" => {
                let mut h = hyperbolic_metric(n)?.with_family("custom");
                if self.params.contains_key("m") {
                    for p in schwarzschild()?.perturbations() {
                        h = h.with_perturbation(Arc::clone(p));
                    }
                }
                let has_aspect = self.chi.is_some()
                    || ["amp", "profile", "order", "c0", "c"].iter().any(|k| self.params.contains_key(*k));
                if has_aspect {
                    for p in aspect()?.perturbations() {
                        h = h.with_perturbation(Arc::clone(p));
                    }
                }
                h
            }
            other => return Err(invalid("family", format!("unknown family '{other}'"))),
        };
        h = h.with_family(self.family.clone());
        for (k, v) in &self.params {
            h = h.with_param(k, v);
        }
        if let Some(path) = &self.chi {
            h = h.with_param("chi", path.display());
        }
        Ok(h)
    }

    pub fn quadrature(&self) -> Result<QuadratureRule> {
        sphere_quadrature(self.dim - 1, self.level)
    }
}

/// `χ` from JSON: `[[l, m, coeff], …]` harmonics (n = 3) or `{"c0": …, "c": […]}`.
pub fn parse_chi(n: usize, text: &str) -> Result<Chi> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid("chi", format!("invalid JSON: {e}")))?;
    match value {
        serde_json::Value::Array(_) => Chi::from_json(n, text).map_err(|e| invalid("chi", e.to_string())),
        serde_json::Value::Object(map) => {
            let c0 = match map.get("c0") {
                Some(v) => v.as_f64().ok_or_else(|| invalid("chi.c0", "expected a number"))?,
                None => 0.0,
            };
            let c = match map.get("c") {
                Some(v) => {
                    let arr = v.as_array().ok_or_else(|| invalid("chi.c", "expected an array"))?;
                    let vals: Vec<f64> = arr
                        .iter()
                        .map(|x| x.as_f64().ok_or_else(|| invalid("chi.c", "expected numbers")))
                        .collect::<Result<_>>()?;
                    if vals.len() != n {
                        return Err(invalid("chi.c", format!("expected {n} entries, got {}", vals.len())));
                    }
                    Vector::from_vec(vals)
                }
                None => Vector::zeros(n),
            };
            if let Some(k) = map.keys().find(|k| *k != "c0" && *k != "c") {
                return Err(invalid("chi", format!("unknown key '{k}'")));
            }
            Ok(Chi::Affine { c0, c })
        }
        _ => Err(invalid("chi", "expected an array of [l, m, coeff] or an object with c0 and c")),
    }
}
