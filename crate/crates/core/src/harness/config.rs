//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key appears at
//! most once except `kernel`, which repeats once per base kernel:
//!
//! ```text
//! method = mkl-ms
//! q = 20
//! budget = 10
//! seeds = 0,1,2
//! kernel = gaussian
//! kernel = laplacian:as_printed
//! synth.shift_magnitude = 12
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::active::EvalSet;
use crate::data::SynthConfig;
use crate::kernels::{FormVariant, KernelKind};
use crate::mkl_da::WeightMode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },

    #[error("`{key}`: invalid value `{value}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("`{key}`: {reason}")]
    Constraint { key: String, reason: String },
}

impl ConfigError {
    /// The offending key, when the error concerns one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key, .. }
            | ConfigError::Duplicate { key, .. }
            | ConfigError::InvalidValue { key, .. }
            | ConfigError::Constraint { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rs,
    Ms,
    MklRs,
    MklMs,
    Svm,
    SkvLike,
    MklDaNoAl,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rs,
        Method::Ms,
        Method::MklRs,
        Method::MklMs,
        Method::Svm,
        Method::SkvLike,
        Method::MklDaNoAl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rs => "rs",
            Method::Ms => "ms",
            Method::MklRs => "mkl-rs",
            Method::MklMs => "mkl-ms",
            Method::Svm => "svm",
            Method::SkvLike => "skv-like-single-kernel-da",
            Method::MklDaNoAl => "mkl-da-no-al",
        }
    }

    /// Whether the method queries target samples.
    pub fn is_active(self) -> bool {
        matches!(self, Method::Rs | Method::Ms | Method::MklRs | Method::MklMs)
    }

    /// Whether the method uses the configured kernel bank (otherwise a
    /// single gaussian kernel).
    pub fn is_multi_kernel(self) -> bool {
        matches!(self, Method::MklRs | Method::MklMs | Method::MklDaNoAl)
    }

    pub fn strategy(self) -> crate::active::Strategy {
        match self {
            Method::Rs | Method::MklRs => crate::active::Strategy::Random,
            _ => crate::active::Strategy::Margin,
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "skv-like" {
            return Ok(Method::SkvLike);
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleKind {
    #[default]
    GroundTruth,
    Interactive,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::GroundTruth => "ground_truth",
            OracleKind::Interactive => "interactive",
        }
    }
}

/// Samples the automatic bandwidth is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaSource {
    /// The initial labeled set, frozen for the run.
    #[default]
    Initial,
    /// The current labeled set, recomputed after every acquisition.
    Labeled,
}

impl GammaSource {
    pub fn name(self) -> &'static str {
        match self {
            GammaSource::Initial => "initial",
            GammaSource::Labeled => "labeled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub method: Method,
    pub q: usize,
    pub budget: usize,
    pub initial_per_class: usize,
    pub c_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub kernels: Vec<(KernelKind, FormVariant)>,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub standardize: bool,
    pub eval_on: EvalSet,
    pub d_mode: WeightMode,
    pub cv_folds: usize,
    /// Fixed bandwidth; `None` derives it from the initial labeled samples.
    pub gamma: Option<f64>,
    pub gamma_source: GammaSource,
    pub max_outer: usize,
    pub oracle: OracleKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synth(SynthConfig::default()),
            method: Method::MklMs,
            q: 20,
            budget: 10,
            initial_per_class: 20,
            c_grid: vec![0.5, 1.0, 2.0, 4.0],
            lambda_grid: vec![0.0625, 0.125, 0.25, 0.5],
            kernels: KernelKind::ALL
                .into_iter()
                .map(|k| (k, FormVariant::Rational))
                .collect(),
            seeds: (0..10).collect(),
            output: None,
            standardize: true,
            eval_on: EvalSet::Remaining,
            d_mode: WeightMode::PerClass,
            cv_folds: 10,
            gamma: None,
            gamma_source: GammaSource::Initial,
            max_outer: 10,
            oracle: OracleKind::GroundTruth,
        }
    }
}

const KEYS: &[&str] = &[
    "dataset",
    "method",
    "q",
    "budget",
    "initial_per_class",
    "c_grid",
    "lambda_grid",
    "kernel",
    "seeds",
    "output",
    "standardize",
    "eval_on",
    "d_mode",
    "cv_folds",
    "gamma",
    "gamma_source",
    "max_outer",
    "oracle",
];

const SYNTH_KEYS: &[&str] = &[
    "synth.num_classes",
    "synth.dimension",
    "synth.per_class_source",
    "synth.per_class_target",
    "synth.class_separation",
    "synth.covariance_scale",
    "synth.shift_magnitude",
    "synth.rotation_angle",
    "synth.seed",
];

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn constraint(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| invalid(key, value, e.to_string()))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (parse(key, a.trim())?, parse(key, b.trim())?);
        if b <= a {
            return Err(invalid(key, value, "empty range"));
        }
        return Ok((a..b).collect());
    }
    parse_list(key, value)
}

fn parse_kernel(value: &str) -> Result<(KernelKind, FormVariant), ConfigError> {
    let (kind, variant) = match value.split_once(':') {
        Some((k, v)) => (k.trim(), Some(v.trim())),
        None => (value, None),
    };
    let kind: KernelKind = parse("kernel", kind)?;
    let variant = match variant {
        Some(v) => parse("kernel", v)?,
        None => FormVariant::default(),
    };
    Ok((kind, variant))
}

fn positive_grid(key: &str, grid: &[f64], allow_zero: bool) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(constraint(key, "must not be empty"));
    }
    if let Some(v) = grid
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0 || (!allow_zero && **v == 0.0))
    {
        return Err(constraint(key, format!("invalid grid value {v}")));
    }
    Ok(())
}

/// Parses and validates configuration text, applying defaults.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut synth = SynthConfig::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut kernels = Vec::new();
    let mut dataset: Option<String> = None;
    let mut synth_keys = false;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: trimmed.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: trimmed.to_string(),
            });
        }
        if !KEYS.contains(&key) && !SYNTH_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        if key != "kernel" && seen.insert(key.to_string(), line).is_some() {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line,
            });
        }
        match key {
            "dataset" => dataset = Some(value.to_string()),
            "method" => cfg.method = parse(key, value)?,
            "q" => cfg.q = parse(key, value)?,
            "budget" => cfg.budget = parse(key, value)?,
            "initial_per_class" => cfg.initial_per_class = parse(key, value)?,
            "c_grid" => cfg.c_grid = parse_list(key, value)?,
            "lambda_grid" => cfg.lambda_grid = parse_list(key, value)?,
            "kernel" => kernels.push(parse_kernel(value)?),
            "seeds" => cfg.seeds = parse_seeds(key, value)?,
            "output" => cfg.output = Some(PathBuf::from(value)),
            "standardize" => cfg.standardize = parse_bool(key, value)?,
            "eval_on" => {
                cfg.eval_on = match value {
                    "remaining" => EvalSet::Remaining,
                    "all" => EvalSet::All,
                    _ => return Err(invalid(key, value, "expected remaining or all")),
                }
            }
            "d_mode" => cfg.d_mode = parse(key, value)?,
            "cv_folds" => cfg.cv_folds = parse(key, value)?,
            "gamma" => {
                cfg.gamma = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "gamma_source" => {
                cfg.gamma_source = match value {
                    "initial" => GammaSource::Initial,
                    "labeled" => GammaSource::Labeled,
                    _ => return Err(invalid(key, value, "expected initial or labeled")),
                }
            }
            "max_outer" => cfg.max_outer = parse(key, value)?,
            "oracle" => {
                cfg.oracle = match value {
                    "ground_truth" => OracleKind::GroundTruth,
                    "interactive" => OracleKind::Interactive,
                    _ => return Err(invalid(key, value, "expected ground_truth or interactive")),
                }
            }
            _ => {
                synth_keys = true;
                match &key["synth.".len()..] {
                    "num_classes" => synth.num_classes = parse(key, value)?,
                    "dimension" => synth.dimension = parse(key, value)?,
                    "per_class_source" => synth.per_class_source = parse(key, value)?,
                    "per_class_target" => synth.per_class_target = parse(key, value)?,
                    "class_separation" => synth.class_separation = parse(key, value)?,
                    "covariance_scale" => synth.covariance_scale = parse(key, value)?,
                    "shift_magnitude" => synth.shift_magnitude = parse(key, value)?,
                    "rotation_angle" => synth.rotation_angle = parse(key, value)?,
                    "seed" => synth.seed = parse(key, value)?,
                    _ => unreachable!("synth keys are listed"),
                }
            }
        }
    }

    cfg.dataset = match dataset.as_deref() {
        Some("synth") | None if synth_keys || dataset.is_some() => {
            synth.validate().map_err(|e| match e {
                crate::error::Error::InvalidParameter { name, reason } => {
                    constraint(&format!("synth.{name}"), reason)
                }
                other => constraint("synth", other.to_string()),
            })?;
            DatasetSource::Synth(synth)
        }
        None => return Err(constraint("dataset", "missing; give a path, `synth`, or synth.* keys")),
        Some(path) => {
            if synth_keys {
                return Err(constraint("dataset", "a dataset path cannot be combined with synth.* keys"));
            }
            DatasetSource::File(PathBuf::from(path))
        }
    };
    if !kernels.is_empty() {
        cfg.kernels = kernels;
    }
    if cfg.q == 0 {
        return Err(constraint("q", "must be at least 1"));
    }
    if cfg.initial_per_class == 0 {
        return Err(constraint("initial_per_class", "must be at least 1"));
    }
    positive_grid("c_grid", &cfg.c_grid, false)?;
    positive_grid("lambda_grid", &cfg.lambda_grid, true)?;
    if cfg.seeds.is_empty() {
        return Err(constraint("seeds", "must not be empty"));
    }
    if cfg.cv_folds < 2 {
        return Err(constraint("cv_folds", "must be at least 2"));
    }
    if cfg.max_outer == 0 {
        return Err(constraint("max_outer", "must be at least 1"));
    }
    if let Some(g) = cfg.gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(constraint("gamma", "must be positive and finite"));
        }
    }
    Ok(cfg)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// The resolved configuration in parseable form (output location
    /// excluded, so echoes from different output directories match).
    pub fn echo(&self) -> String {
        let mut out = String::new();
        match &self.dataset {
            DatasetSource::File(p) => {
                let _ = writeln!(out, "dataset = {}", p.display());
            }
            DatasetSource::Synth(s) => {
                let _ = writeln!(out, "dataset = synth");
                let _ = writeln!(out, "synth.num_classes = {}", s.num_classes);
                let _ = writeln!(out, "synth.dimension = {}", s.dimension);
                let _ = writeln!(out, "synth.per_class_source = {}", s.per_class_source);
                let _ = writeln!(out, "synth.per_class_target = {}", s.per_class_target);
                let _ = writeln!(out, "synth.class_separation = {}", s.class_separation);
                let _ = writeln!(out, "synth.covariance_scale = {}", s.covariance_scale);
                let _ = writeln!(out, "synth.shift_magnitude = {}", s.shift_magnitude);
                let _ = writeln!(out, "synth.rotation_angle = {}", s.rotation_angle);
                let _ = writeln!(out, "synth.seed = {}", s.seed);
            }
        }
        let _ = writeln!(out, "method = {}", self.method.name());
        let _ = writeln!(out, "q = {}", self.q);
        let _ = writeln!(out, "budget = {}", self.budget);
        let _ = writeln!(out, "initial_per_class = {}", self.initial_per_class);
        let _ = writeln!(out, "c_grid = {}", join(&self.c_grid));
        let _ = writeln!(out, "lambda_grid = {}", join(&self.lambda_grid));
        for (kind, variant) in &self.kernels {
            let _ = writeln!(out, "kernel = {}:{}", kind.name(), variant.name());
        }
        let _ = writeln!(out, "seeds = {}", join(&self.seeds));
        let _ = writeln!(out, "standardize = {}", self.standardize);
        let _ = writeln!(out, "eval_on = {}", self.eval_on.name());
        let _ = writeln!(out, "d_mode = {}", self.d_mode.name());
        let _ = writeln!(out, "cv_folds = {}", self.cv_folds);
        match self.gamma {
            Some(g) => {
                let _ = writeln!(out, "gamma = {g}");
            }
            None => {
                let _ = writeln!(out, "gamma = auto");
            }
        }
        let _ = writeln!(out, "gamma_source = {}", self.gamma_source.name());
        let _ = writeln!(out, "max_outer = {}", self.max_outer);
        let _ = writeln!(out, "oracle = {}", self.oracle.name());
        out
    }
}
