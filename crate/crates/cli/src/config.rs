//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment. Lists are comma separated and
//! ranges are written `lo:hi:step`. Every key is known in advance; anything
//! else is rejected so typos cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use kpzlab::exceptional::{self, Coupling};
use kpzlab::poisson_lpp::LppParams;
use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("config is for experiment `{found}`, not `{expected}`")]
    WrongExperiment { expected: String, found: String },
    #[error("unknown mode `{mode}` for {experiment}")]
    UnknownMode { experiment: String, mode: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    SampleLandscape,
    SymmetrySuite,
    TwTable,
    MaxCdf,
    BesselSuite,
    Exceptional,
    DimEstimate,
    Report,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::SampleLandscape,
        Experiment::SymmetrySuite,
        Experiment::TwTable,
        Experiment::MaxCdf,
        Experiment::BesselSuite,
        Experiment::Exceptional,
        Experiment::DimEstimate,
        Experiment::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleLandscape => "sample-landscape",
            Experiment::SymmetrySuite => "symmetry-suite",
            Experiment::TwTable => "tw-table",
            Experiment::MaxCdf => "max-cdf",
            Experiment::BesselSuite => "bessel-suite",
            Experiment::Exceptional => "exceptional",
            Experiment::DimEstimate => "dim-estimate",
            Experiment::Report => "report",
        }
    }

    /// Accepted `mode` values; the first is the default.
    pub fn modes(self) -> &'static [&'static str] {
        match self {
            Experiment::SampleLandscape => &["profile", "tw-onepoint", "bessel-ic"],
            Experiment::DimEstimate => &["cantor", "synthetic", "records"],
            _ => &["default"],
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    /// `lo, lo + step, ...` up to `hi` inclusive (with rounding slack).
    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.hi < self.lo {
            return Vec::new();
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|j| self.lo + j as f64 * self.step).collect()
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

impl FromStr for Range {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err("expected lo:hi:step".into());
        }
        let p = |v: &str| v.parse::<f64>().map_err(|e| e.to_string());
        Ok(Range { lo: p(parts[0])?, hi: p(parts[1])?, step: p(parts[2])? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AlphaRule {
    /// Quantile of the thinning level over pilot replicas.
    Quantile(f64),
    Fixed(f64),
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::Quantile(q) => write!(f, "quantile:{q}"),
            AlphaRule::Fixed(a) => write!(f, "fixed:{a}"),
        }
    }
}

impl FromStr for AlphaRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, v) = s.split_once(':').ok_or("expected quantile:Q or fixed:A")?;
        let v: f64 = v.trim().parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
        match kind.trim() {
            "quantile" => Ok(AlphaRule::Quantile(v)),
            "fixed" => Ok(AlphaRule::Fixed(v)),
            other => Err(format!("unknown alpha rule `{other}`")),
        }
    }
}

pub fn coupling_name(c: Coupling) -> &'static str {
    match c {
        Coupling::Independent => "independent",
        Coupling::SharedStrip => "shared-strip",
        Coupling::Identical => "identical",
    }
}

fn parse_coupling(s: &str) -> Result<Coupling, String> {
    match s {
        "independent" => Ok(Coupling::Independent),
        "shared-strip" => Ok(Coupling::SharedStrip),
        "identical" => Ok(Coupling::Identical),
        other => Err(format!("unknown coupling `{other}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub mode: String,
    pub n: f64,
    pub k: usize,
    pub replicas: usize,
    pub pilot_replicas: usize,
    pub coupling_replicas: usize,
    pub samples: usize,
    pub seed: u64,
    /// Time horizon of landscape profiles.
    pub t: f64,
    pub window: f64,
    pub dx: f64,
    pub dt: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub levels: Range,
    pub wedges: Vec<f64>,
    pub initial: String,
    pub epsilons: Vec<f64>,
    pub energy_epsilons: Vec<f64>,
    pub two_point_epsilon: f64,
    pub tie_cells: u32,
    pub deltas: Vec<f64>,
    pub lags: Vec<f64>,
    pub holder_lags: Vec<f64>,
    pub profile_lags: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alpha_rule: AlphaRule,
    pub coupling: Coupling,
    pub depth: u32,
    pub trials: usize,
    pub records: String,
    pub inputs: Vec<String>,
    pub out: String,
}

pub const KEYS: [&str; 34] = [
    "experiment",
    "mode",
    "n",
    "k",
    "replicas",
    "pilot_replicas",
    "coupling_replicas",
    "samples",
    "seed",
    "t",
    "window",
    "dx",
    "dt",
    "y_min",
    "y_max",
    "levels",
    "wedges",
    "initial",
    "epsilons",
    "energy_epsilons",
    "two_point_epsilon",
    "tie_cells",
    "deltas",
    "lags",
    "holder_lags",
    "profile_lags",
    "gammas",
    "alpha_rule",
    "coupling",
    "depth",
    "trials",
    "records",
    "inputs",
    "out",
];

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|j| 2f64.powi(-j)).collect()
}

impl ExperimentConfig {
    /// Defaults for `experiment` in `mode` at the given `n` and `k`.
    pub fn defaults(experiment: Experiment, mode: &str, n: Option<f64>, k: Option<usize>) -> Result<Self, ConfigError> {
        if !experiment.modes().contains(&mode) {
            return Err(ConfigError::UnknownMode { experiment: experiment.name().into(), mode: mode.into() });
        }
        let (dn, dreps) = match (experiment, mode) {
            (Experiment::SampleLandscape, "tw-onepoint") => (1024.0, 4000),
            (Experiment::SampleLandscape, "bessel-ic") => (512.0, 2000),
            (Experiment::SampleLandscape, _) => (256.0, 1),
            (Experiment::SymmetrySuite, _) => (256.0, 200),
            (Experiment::Exceptional, _) => (512.0, 2000),
            (Experiment::BesselSuite, _) => (512.0, 2000),
            _ => (512.0, 1),
        };
        let n = n.unwrap_or(dn);
        let k = k.unwrap_or(if experiment == Experiment::Exceptional { 3 } else { 2 });
        let chi = LppParams::landscape(n).map(|p| p.scale).unwrap_or(1.0);
        let ke = k.clamp(2, 3);
        let (y_min, y_max, dx, window) = match (experiment, mode) {
            (Experiment::SampleLandscape, "tw-onepoint") => (-1.0, 1.0, 0.25, 1.0),
            (Experiment::SampleLandscape, "bessel-ic") => (-2.5, 2.5, 0.01, 8.0),
            (Experiment::Exceptional, _) => (-2.5, 2.5, 0.01, exceptional::DEFAULT_WINDOW),
            _ => (-2.0, 2.0, 0.01, 3.0),
        };
        let levels = match experiment {
            Experiment::TwTable => Range { lo: -8.0, hi: 6.0, step: 0.05 },
            _ => Range { lo: -1.0, hi: 2.0, step: 0.05 },
        };
        Ok(ExperimentConfig {
            experiment,
            mode: mode.into(),
            n,
            k,
            replicas: dreps,
            pilot_replicas: 100,
            coupling_replicas: 100,
            samples: match experiment {
                Experiment::BesselSuite => 100_000,
                _ => 2000,
            },
            seed: 20_240_607,
            t: 1.0,
            window,
            dx,
            dt: exceptional::TIME_STEP,
            y_min,
            y_max,
            levels,
            wedges: vec![0.0],
            initial: "narrow-wedge".into(),
            epsilons: exceptional::default_epsilons(ke, chi),
            energy_epsilons: vec![0.05, 0.1, 0.2],
            two_point_epsilon: 0.1,
            tie_cells: 2,
            deltas: dyadic(4, 10),
            lags: exceptional::default_lags(),
            holder_lags: exceptional::holder_lags(),
            profile_lags: vec![0.25, 0.5, 1.0],
            gammas: vec![0.5, 0.8],
            alpha_rule: AlphaRule::Quantile(exceptional::ALPHA_QUANTILE),
            coupling: Coupling::Independent,
            depth: 10,
            trials: 200,
            records: String::new(),
            inputs: Vec::new(),
            out: String::new(),
        })
    }

    /// Parses `text` for `experiment`: defaults first (using `mode`, `n`, `k`
    /// from the text), then every key in the text.
    pub fn parse(experiment: Experiment, text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line: i + 1, key: key.into() });
            }
            if map.insert(key, (i + 1, value)).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key: key.into() });
            }
        }
        if let Some((_, name)) = map.get("experiment") {
            if *name != experiment.name() {
                return Err(ConfigError::WrongExperiment { expected: experiment.name().into(), found: (*name).into() });
            }
        }
        let mode = map.get("mode").map(|m| m.1).unwrap_or(experiment.modes()[0]);
        let n = map.get("n").map(|v| parse_value::<f64>("n", v.1)).transpose()?;
        let k = map.get("k").map(|v| parse_value::<usize>("k", v.1)).transpose()?;
        let mut cfg = Self::defaults(experiment, mode, n, k)?;
        for (key, (_, value)) in map {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" | "mode" => {}
            "n" => self.n = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "replicas" => self.replicas = parse_value(key, value)?,
            "pilot_replicas" => self.pilot_replicas = parse_value(key, value)?,
            "coupling_replicas" => self.coupling_replicas = parse_value(key, value)?,
            "samples" => self.samples = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "t" => self.t = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "dx" => self.dx = parse_value(key, value)?,
            "dt" => self.dt = parse_value(key, value)?,
            "y_min" => self.y_min = parse_value(key, value)?,
            "y_max" => self.y_max = parse_value(key, value)?,
            "levels" => self.levels = parse_value(key, value)?,
            "wedges" => self.wedges = parse_list(key, value)?,
            "initial" => self.initial = value.into(),
            "epsilons" => self.epsilons = parse_list(key, value)?,
            "energy_epsilons" => self.energy_epsilons = parse_list(key, value)?,
            "two_point_epsilon" => self.two_point_epsilon = parse_value(key, value)?,
            "tie_cells" => self.tie_cells = parse_value(key, value)?,
            "deltas" => self.deltas = parse_list(key, value)?,
            "lags" => self.lags = parse_list(key, value)?,
            "holder_lags" => self.holder_lags = parse_list(key, value)?,
            "profile_lags" => self.profile_lags = parse_list(key, value)?,
            "gammas" => self.gammas = parse_list(key, value)?,
            "alpha_rule" => self.alpha_rule = parse_value(key, value)?,
            "coupling" => {
                self.coupling = parse_coupling(value).map_err(|reason| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                    reason,
                })?
            }
            "depth" => self.depth = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "records" => self.records = value.into(),
            "inputs" => self.inputs = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "out" => self.out = value.into(),
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    /// Every key in a fixed order; [`ExperimentConfig::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("experiment", self.experiment.name().into());
        put("mode", self.mode.clone());
        put("n", self.n.to_string());
        put("k", self.k.to_string());
        put("replicas", self.replicas.to_string());
        put("pilot_replicas", self.pilot_replicas.to_string());
        put("coupling_replicas", self.coupling_replicas.to_string());
        put("samples", self.samples.to_string());
        put("seed", self.seed.to_string());
        put("t", self.t.to_string());
        put("window", self.window.to_string());
        put("dx", self.dx.to_string());
        put("dt", self.dt.to_string());
        put("y_min", self.y_min.to_string());
        put("y_max", self.y_max.to_string());
        put("levels", self.levels.to_string());
        put("wedges", list(&self.wedges));
        put("initial", self.initial.clone());
        put("epsilons", list(&self.epsilons));
        put("energy_epsilons", list(&self.energy_epsilons));
        put("two_point_epsilon", self.two_point_epsilon.to_string());
        put("tie_cells", self.tie_cells.to_string());
        put("deltas", list(&self.deltas));
        put("lags", list(&self.lags));
        put("holder_lags", list(&self.holder_lags));
        put("profile_lags", list(&self.profile_lags));
        put("gammas", list(&self.gammas));
        put("alpha_rule", self.alpha_rule.to_string());
        put("coupling", coupling_name(self.coupling).into());
        put("depth", self.depth.to_string());
        put("trials", self.trials.to_string());
        put("records", self.records.clone());
        put("inputs", self.inputs.join(","));
        put("out", self.out.clone());
        s
    }

    /// `L(x, y)` profile points `y_min, y_min + dx, ..., y_max`.
    pub fn ys(&self) -> Vec<f64> {
        let n = ((self.y_max - self.y_min) / self.dx).round() as i64;
        (0..=n).map(|j| self.y_min + j as f64 * self.dx).collect()
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: value.into(), reason: e.to_string() })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|v| parse_value(key, v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub key: &'static str,
    pub message: String,
}

fn is_multiple(x: f64, unit: f64) -> bool {
    let r = x / unit;
    r >= 1.0 - 1e-9 && (r - r.round()).abs() < 1e-9
}

/// Argmax padding: beyond `2.5 T^{2/3}` from a wedge the parabola has pulled
/// the profile far below its maximum; the light-cone reach `m T` is exact.
pub const PADDING_SCALE: f64 = 2.5;

/// Static checks; an empty list means the configuration can run.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |key: &'static str, message: String| out.push(Diagnostic { key, message });
    let sorted = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
    let e = cfg.experiment;
    let uses_replicas = !matches!(e, Experiment::TwTable | Experiment::MaxCdf | Experiment::Report);
    if uses_replicas && cfg.replicas == 0 {
        diag("replicas", "replica count must be at least 1".into());
    }
    if !(cfg.n > 0.0) {
        diag("n", format!("n must be positive, got {}", cfg.n));
    }
    match e {
        Experiment::Exceptional => {
            if !(cfg.k == 2 || cfg.k == 3) {
                diag("k", format!("k must be 2 or 3, got {}", cfg.k));
            }
            for (key, v) in [
                ("epsilons", &cfg.epsilons),
                ("energy_epsilons", &cfg.energy_epsilons),
                ("deltas", &cfg.deltas),
                ("lags", &cfg.lags),
                ("holder_lags", &cfg.holder_lags),
                ("gammas", &cfg.gammas),
            ] {
                if !sorted(v) {
                    diag(key, format!("`{key}` must be nonempty and strictly increasing"));
                }
            }
            if (cfg.dt - exceptional::TIME_STEP).abs() > 1e-15 {
                diag("dt", format!("the record grid is fixed at dt = {}", exceptional::TIME_STEP));
            }
            for (key, v) in [("deltas", &cfg.deltas), ("lags", &cfg.lags), ("holder_lags", &cfg.holder_lags)] {
                if let Some(x) = v.iter().find(|&&x| !is_multiple(x, cfg.dt)) {
                    diag(key, format!("dt = {} does not divide {x}", cfg.dt));
                }
            }
            if cfg.deltas.iter().any(|&d| d > 0.5) {
                diag("deltas", "boxes larger than the record interval [1/2, 1)".into());
            }
            if cfg.lags.iter().chain(&cfg.holder_lags).any(|&s| s >= 0.5) {
                diag("lags", "lags must be below the record interval length 1/2".into());
            }
            if cfg.gammas.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
                diag("gammas", "gamma must lie in (0, 1)".into());
            }
            if cfg.epsilons.len() < 4 {
                diag("epsilons", "the slope fit needs at least 4 eps values".into());
            }
            if let AlphaRule::Quantile(q) = cfg.alpha_rule {
                if !(q > 0.0 && q < 1.0) {
                    diag("alpha_rule", format!("quantile {q} outside (0, 1)"));
                }
            }
            if cfg.pilot_replicas == 0 && matches!(cfg.alpha_rule, AlphaRule::Quantile(_)) {
                diag("pilot_replicas", "the quantile rule needs pilot replicas".into());
            }
            check_padding(cfg, cfg.window, 1.0, &mut diag);
        }
        Experiment::SampleLandscape => {
            if !(cfg.dx > 0.0) || !(cfg.y_max > cfg.y_min) || !is_multiple(cfg.y_max - cfg.y_min, cfg.dx) {
                diag("dx", format!("dx = {} must divide y_max - y_min = {}", cfg.dx, cfg.y_max - cfg.y_min));
            }
            if !(cfg.t > 0.0) {
                diag("t", "time horizon must be positive".into());
            }
            match cfg.mode.as_str() {
                "bessel-ic" => {
                    if let Some(x) = cfg.profile_lags.iter().find(|&&x| !is_multiple(x, cfg.dx)) {
                        diag("profile_lags", format!("dx = {} does not divide lag {x}", cfg.dx));
                    }
                    if !sorted(&cfg.profile_lags) {
                        diag("profile_lags", "`profile_lags` must be nonempty and strictly increasing".into());
                    }
                    let reach = cfg.y_min.abs().max(cfg.y_max.abs());
                    check_padding(cfg, cfg.window - reach, cfg.t, &mut diag);
                }
                "profile" => {
                    if !(cfg.initial == "narrow-wedge" || cfg.initial == "bessel") {
                        diag("initial", format!("initial must be narrow-wedge or bessel, got `{}`", cfg.initial));
                    }
                    if cfg.initial == "bessel" {
                        let reach = cfg.y_min.abs().max(cfg.y_max.abs());
                        check_padding(cfg, cfg.window - reach, cfg.t, &mut diag);
                    }
                }
                _ => {}
            }
        }
        Experiment::TwTable | Experiment::MaxCdf => {
            if !(cfg.levels.step > 0.0) || !(cfg.levels.hi > cfg.levels.lo) {
                diag("levels", format!("range {} is empty", cfg.levels));
            }
            if e == Experiment::MaxCdf && (!sorted(&cfg.wedges) || cfg.wedges.iter().any(|x| x.abs() > 1.0)) {
                diag("wedges", "wedge positions must be increasing and inside [-1, 1]".into());
            }
        }
        Experiment::DimEstimate => {
            if cfg.mode == "records" && cfg.records.is_empty() {
                diag("records", "records mode needs the path of a records.bin file".into());
            }
            if cfg.mode == "records" {
                if let Some(x) = cfg.deltas.iter().find(|&&x| !is_multiple(x, cfg.dt)) {
                    diag("deltas", format!("dt = {} does not divide {x}", cfg.dt));
                }
                if !sorted(&cfg.deltas) {
                    diag("deltas", "`deltas` must be nonempty and strictly increasing".into());
                }
            }
            if cfg.mode == "cantor" && !(4..=14).contains(&cfg.depth) {
                diag("depth", "Cantor depth must lie in 4..=14".into());
            }
        }
        Experiment::Report => {
            if cfg.inputs.is_empty() {
                diag("inputs", "no experiment directories to report on".into());
            }
        }
        Experiment::SymmetrySuite | Experiment::BesselSuite => {}
    }
    out
}

fn check_padding(cfg: &ExperimentConfig, room: f64, t: f64, diag: &mut impl FnMut(&'static str, String)) {
    let Ok(p) = LppParams::landscape(cfg.n) else { return };
    let need = (p.slope * t).min(PADDING_SCALE * t.powf(2.0 / 3.0));
    if room < need {
        diag(
            "window",
            format!(
                "window leaves {room} around the query range; the padding rule needs min(m T, {PADDING_SCALE} T^(2/3)) = {need}"
            ),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            ExperimentConfig::parse(Experiment::Exceptional, "replcas = 3"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse(Experiment::Exceptional, "k = 2\nk = 3"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(ExperimentConfig::parse(Experiment::Exceptional, "k 2"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            ExperimentConfig::parse(Experiment::TwTable, "experiment = max-cdf"),
            Err(ConfigError::WrongExperiment { .. })
        ));
    }

    #[test]
    fn defaults_follow_n_and_k() {
        let c = ExperimentConfig::parse(Experiment::Exceptional, "n = 64 # chi = 4\nk = 2\n").unwrap();
        assert_eq!(c.epsilons[0], 0.5 / 4.0);
        assert_eq!(c.epsilons.len(), 6);
        assert!(validate(&c).is_empty(), "{:?}", validate(&c));
    }

    #[test]
    fn round_trip_every_experiment() {
        for e in Experiment::ALL {
            for m in e.modes() {
                let c = ExperimentConfig::defaults(e, m, None, None).unwrap();
                assert_eq!(ExperimentConfig::parse(e, &c.to_text()).unwrap(), c);
            }
        }
    }

    #[test]
    fn diagnostics() {
        let mut c = ExperimentConfig::defaults(Experiment::Exceptional, "default", None, None).unwrap();
        assert!(validate(&c).is_empty());
        c.epsilons.reverse();
        assert!(validate(&c).iter().any(|d| d.key == "epsilons"));
        let mut c = ExperimentConfig::defaults(Experiment::Exceptional, "default", None, None).unwrap();
        c.deltas = vec![0.0015, 0.003];
        assert!(validate(&c).iter().any(|d| d.key == "deltas" && d.message.contains("divide")));
        c = ExperimentConfig::defaults(Experiment::Exceptional, "default", None, None).unwrap();
        c.window = 1.0;
        assert!(validate(&c).iter().any(|d| d.key == "window" && d.message.contains("padding rule")));
        let mut c = ExperimentConfig::defaults(Experiment::SampleLandscape, "bessel-ic", None, None).unwrap();
        assert!(validate(&c).is_empty(), "{:?}", validate(&c));
        c.profile_lags = vec![0.255];
        assert!(validate(&c).iter().any(|d| d.key == "profile_lags"));
    }
}
