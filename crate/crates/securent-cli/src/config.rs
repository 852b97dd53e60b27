//! `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; list values are comma
//! separated. Every key has a default, so the smallest useful file is a
//! single `topology = ...` line.

use std::path::{Path, PathBuf};

use securent_core::attacker::AttackerParams;
use securent_core::measurement::DelayDist;
use securent_core::obfuscation::ModuleParams;

use crate::Method;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key {key}: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: Option<PathBuf>,
    /// Monitor fixture; defaults to the topology path with a `.monitors`
    /// extension.
    pub monitors: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub probe_counts: Vec<usize>,
    pub congestion_probabilities: Vec<f64>,
    pub congestion_low: f64,
    pub congestion_high: f64,
    /// Probe rounds per trial for the congestion-level and per-p figures.
    pub figure_probes: usize,
    pub alpha: Vec<f64>,
    /// `None` sets c so the mean fake delay equals the idle mean.
    pub c: Option<f64>,
    pub module: ModuleParams,
    pub rewire_fraction: f64,
    pub fake_seeds: usize,
    pub fake_congestion: f64,
    pub congestion_ratio: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub trials: usize,
    pub seed: u64,
    pub idle: DelayDist,
    pub congested: DelayDist,
    pub threshold_k: f64,
    pub attacker: AttackerParams,
    /// Rounds per trial scored by CLINK.
    pub f1_rounds: usize,
    /// Rounds per trial fed to the trusted-user least-squares fit.
    pub nrmse_rounds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: None,
            monitors: None,
            methods: vec![Method::None, Method::Securent, Method::Uniform],
            probe_counts: (1..=9).map(|k| 200 * k).collect(),
            congestion_probabilities: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            congestion_low: 0.1,
            congestion_high: 0.4,
            figure_probes: 1000,
            alpha: vec![4.0],
            c: None,
            module: ModuleParams::default(),
            rewire_fraction: 0.5,
            fake_seeds: 1,
            fake_congestion: 0.012,
            congestion_ratio: 150.0,
            lambda1: 100.0,
            lambda2: 10.0,
            trials: 10,
            seed: 1,
            idle: DelayDist::IDLE,
            congested: DelayDist::CONGESTED,
            threshold_k: 3.0,
            attacker: AttackerParams::default(),
            f1_rounds: 1000,
            nrmse_rounds: 50,
        }
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    let out = v
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>().map_err(|_| ConfigError::Value {
                key: key.into(),
                msg: format!("cannot parse {t:?}"),
            })
        })
        .collect::<Result<Vec<T>, _>>()?;
    if out.is_empty() {
        return Err(ConfigError::Value {
            key: key.into(),
            msg: "list is empty".into(),
        });
    }
    Ok(out)
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>().map_err(|_| ConfigError::Value {
        key: key.into(),
        msg: format!("cannot parse {v:?}"),
    })
}

impl ExperimentConfig {
    /// Parse a config file. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            c.set(k.trim(), v.trim(), base)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, k: &str, v: &str, base: Option<&Path>) -> Result<(), ConfigError> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        match k {
            "topology" => self.topology = Some(path(v)),
            "monitors" => self.monitors = Some(path(v)),
            "methods" => {
                self.methods = list::<String>(k, v)?
                    .iter()
                    .map(|m| {
                        Method::parse(m).ok_or_else(|| ConfigError::Value {
                            key: k.into(),
                            msg: format!("unknown method {m:?}"),
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            "probe_counts" => self.probe_counts = list(k, v)?,
            "congestion_probabilities" => self.congestion_probabilities = list(k, v)?,
            "congestion_low" => self.congestion_low = one(k, v)?,
            "congestion_high" => self.congestion_high = one(k, v)?,
            "figure_probes" => self.figure_probes = one(k, v)?,
            "alpha" => self.alpha = list(k, v)?,
            "c" => self.c = if v == "auto" { None } else { Some(one(k, v)?) },
            "gamma" => self.module.gamma = one(k, v)?,
            "eta" => self.module.eta = one(k, v)?,
            "t_max" => self.module.t_max = one(k, v)?,
            "rewire_fraction" => self.rewire_fraction = one(k, v)?,
            "fake_seeds" => self.fake_seeds = one(k, v)?,
            "fake_congestion" => self.fake_congestion = one(k, v)?,
            "congestion_ratio" => self.congestion_ratio = one(k, v)?,
            "lambda1" => self.lambda1 = one(k, v)?,
            "lambda2" => self.lambda2 = one(k, v)?,
            "trials" => self.trials = one(k, v)?,
            "seed" => self.seed = one(k, v)?,
            "idle_mean" => self.idle.mean = one(k, v)?,
            "idle_spread" => self.idle.spread = one(k, v)?,
            "congested_mean" => self.congested.mean = one(k, v)?,
            "congested_spread" => self.congested.spread = one(k, v)?,
            "threshold_k" => self.threshold_k = one(k, v)?,
            "penalty" => self.attacker.penalty = one(k, v)?,
            "tolerance" => self.attacker.tolerance = one(k, v)?,
            "f1_rounds" => self.f1_rounds = one(k, v)?,
            "nrmse_rounds" => self.nrmse_rounds = one(k, v)?,
            _ => return Err(ConfigError::UnknownKey(k.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| {
            Err(ConfigError::Value {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.fake_seeds == 0 {
            return bad("fake_seeds", "must be at least 1");
        }
        if self.methods.is_empty() || self.probe_counts.is_empty() || self.congestion_probabilities.is_empty() || self.alpha.is_empty() {
            return bad("lists", "must be non-empty");
        }
        if self.probe_counts.iter().chain([&self.figure_probes]).any(|&n| n < 2) {
            return bad("probe_counts", "need at least 2 rounds per trial");
        }
        for p in self.congestion_probabilities.iter().chain([&self.congestion_low, &self.congestion_high]) {
            if !(0.0..=1.0).contains(p) {
                return bad("congestion_probabilities", "probabilities must lie in [0, 1]");
            }
        }
        if self.alpha.iter().any(|a| !(*a > 0.0)) {
            return bad("alpha", "must be positive");
        }
        Ok(())
    }

    pub fn monitors_path(&self) -> Option<PathBuf> {
        self.monitors
            .clone()
            .or_else(|| self.topology.as_ref().map(|t| t.with_extension("monitors")))
    }
}
