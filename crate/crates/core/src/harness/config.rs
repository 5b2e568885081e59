//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # Lorenz96 alpha sweep
//! task = lorenz96
//! sweep = alpha
//! min = 0
//! max = 5
//! steps = 21
//! seed = 7
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors. Anything not given falls back to the task defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ChaoticSystem, TaskDefinition, TaskKind};
use crate::error::{Error, Result};
use crate::readout::DEFAULT_ETA;

pub const KEYS: &[&str] = &[
    "task", "defaults", "n", "dt", "eta", "gamma", "epsilon", "alpha", "tau_bar", "t1", "t2",
    "t3", "hr_current", "sweep", "min", "max", "steps", "ensemble", "seed", "output", "format",
    "jobs", "mc_tau_max",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Gamma,
    Epsilon,
    Alpha,
    Compare,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma" => Ok(SweepKind::Gamma),
            "epsilon" => Ok(SweepKind::Epsilon),
            "alpha" => Ok(SweepKind::Alpha),
            "compare" => Ok(SweepKind::Compare),
            other => Err(Error::Config(format!("unknown sweep '{other}'"))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Gamma => "gamma",
            SweepKind::Epsilon => "epsilon",
            SweepKind::Alpha => "alpha",
            SweepKind::Compare => "compare",
        })
    }
}

/// Where the task's fixed `(γ, ε)` come from: the figure captions that
/// parameterise the shift experiments, or the values quoted in the tuning
/// discussion. They differ for Lorenz and Hindmarsh-Rose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Caption,
    Text,
}

impl FromStr for ParamSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "caption" => Ok(ParamSource::Caption),
            "text" => Ok(ParamSource::Text),
            other => Err(Error::Config(format!("unknown defaults source '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

/// Evenly spaced grid, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        SweepRange { min, max, steps }
    }

    pub fn grid(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|k| {
                    if k == n - 1 {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * k as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::Config(format!(
                "sweep range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("sweep needs at least one step".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    GammaSweep { range: SweepRange },
    EpsilonSweep { range: SweepRange },
    AlphaSweep { range: SweepRange, ensemble: usize },
    ShiftComparison { gamma_range: SweepRange, alpha: f64, ensemble: usize },
}

impl Sweep {
    pub fn kind(&self) -> SweepKind {
        match self {
            Sweep::GammaSweep { .. } => SweepKind::Gamma,
            Sweep::EpsilonSweep { .. } => SweepKind::Epsilon,
            Sweep::AlphaSweep { .. } => SweepKind::Alpha,
            Sweep::ShiftComparison { .. } => SweepKind::Compare,
        }
    }

    pub fn range(&self) -> SweepRange {
        match self {
            Sweep::GammaSweep { range }
            | Sweep::EpsilonSweep { range }
            | Sweep::AlphaSweep { range, .. } => *range,
            Sweep::ShiftComparison { gamma_range, .. } => *gamma_range,
        }
    }
}

/// How the characteristic timescale is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauBar {
    Fixed(f64),
    /// Measured on the task input over `[t1, t3)`.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task_kind: TaskKind,
    pub task: TaskDefinition,
    pub tau_bar: TauBar,
    pub defaults: ParamSource,
    pub n: usize,
    pub dt: f64,
    pub eta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub sweep: Sweep,
    pub seed: u64,
    pub mc_tau_max: usize,
    pub jobs: usize,
    pub output: PathBuf,
    pub format: OutputFormat,
}

/// Per-task `(γ, ε, α)` and the α range of its shift figure.
pub fn task_defaults(kind: TaskKind, source: ParamSource) -> (f64, f64, f64, f64) {
    match (kind, source) {
        (TaskKind::Lorenz96, _) => (0.9, 0.8, 4.0, 5.0),
        (TaskKind::Lorenz, ParamSource::Caption) => (1.3, 2.0, 0.25, 1.0),
        (TaskKind::Lorenz, ParamSource::Text) => (1.65, 1.0, 0.25, 1.0),
        (TaskKind::HindmarshRose, ParamSource::Caption) => (1.65, 1.0, 2.5, 3.0),
        (TaskKind::HindmarshRose, ParamSource::Text) => (0.9, 0.8, 2.5, 3.0),
    }
}

/// Raw `key = value` settings, in order of appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            if settings.get(key).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            settings.set(key, value.trim())?;
        }
        Ok(settings)
    }

    /// Sets or overrides a key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
            })
            .transpose()
    }

    /// Resolves every field, filling gaps from the task defaults.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let task_kind = match self.get("task") {
            Some(v) => v.parse()?,
            None => TaskKind::Lorenz96,
        };
        let defaults = match self.get("defaults") {
            Some(v) => v.parse()?,
            None => ParamSource::Caption,
        };
        let sweep_kind = match self.get("sweep") {
            Some(v) => v.parse()?,
            None => SweepKind::Alpha,
        };
        let format = match self.get("format") {
            Some(v) => v.parse()?,
            None => OutputFormat::Csv,
        };
        let (gamma_default, epsilon_default, alpha_default, alpha_max) =
            task_defaults(task_kind, defaults);

        let mut task = TaskDefinition::for_kind(task_kind);
        if let Some(t1) = self.parsed("t1")? {
            task.t1 = t1;
        }
        if let Some(t2) = self.parsed("t2")? {
            task.t2 = t2;
        }
        if let Some(t3) = self.parsed("t3")? {
            task.t3 = t3;
        }
        if let Some(current) = self.parsed::<f64>("hr_current")? {
            match task.system {
                ChaoticSystem::HindmarshRose { .. } => {
                    task.system = ChaoticSystem::HindmarshRose { current }
                }
                _ => return Err(Error::Config("hr_current only applies to task hr".into())),
            }
        }
        let tau_bar = match self.get("tau_bar") {
            Some("auto") => TauBar::Auto,
            Some(_) => {
                let v: f64 = self.parsed("tau_bar")?.unwrap_or(task.tau_bar);
                task.tau_bar = v;
                TauBar::Fixed(v)
            }
            None => TauBar::Fixed(task.tau_bar),
        };
        task.validate()?;

        let gamma = self.parsed("gamma")?.unwrap_or(gamma_default);
        // the gamma sweep tunes at unit coupling
        let epsilon = self.parsed("epsilon")?.unwrap_or(match sweep_kind {
            SweepKind::Gamma => 1.0,
            _ => epsilon_default,
        });
        let alpha = self.parsed("alpha")?.unwrap_or(alpha_default);
        let ensemble = self.parsed("ensemble")?.unwrap_or(50);

        let (lo, hi, steps) = match sweep_kind {
            SweepKind::Gamma | SweepKind::Compare => (0.1, 5.0, 25),
            SweepKind::Epsilon => (0.1, 3.0, 15),
            SweepKind::Alpha => (0.0, alpha_max, 21),
        };
        let range = SweepRange::new(
            self.parsed("min")?.unwrap_or(lo),
            self.parsed("max")?.unwrap_or(hi),
            self.parsed("steps")?.unwrap_or(steps),
        );
        let sweep = match sweep_kind {
            SweepKind::Gamma => Sweep::GammaSweep { range },
            SweepKind::Epsilon => Sweep::EpsilonSweep { range },
            SweepKind::Alpha => Sweep::AlphaSweep { range, ensemble },
            SweepKind::Compare => Sweep::ShiftComparison {
                gamma_range: range,
                alpha,
                ensemble,
            },
        };

        let config = ExperimentConfig {
            task_kind,
            task,
            tau_bar,
            defaults,
            n: self.parsed("n")?.unwrap_or(100),
            dt: self.parsed("dt")?.unwrap_or(0.01),
            eta: self.parsed("eta")?.unwrap_or(DEFAULT_ETA),
            gamma,
            epsilon,
            alpha,
            sweep,
            seed: self.parsed("seed")?.unwrap_or(1),
            mc_tau_max: self.parsed("mc_tau_max")?.unwrap_or(300),
            jobs: self.parsed("jobs")?.unwrap_or(1),
            output: self.get("output").map(PathBuf::from).unwrap_or_else(|| "out".into()),
            format,
        };
        config.validate()?;
        Ok(config)
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Settings::parse(text)?.resolve()
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.sweep.range().validate()?;
        let positive = [
            ("dt", self.dt),
            ("eta", self.eta),
            ("gamma", self.gamma),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon >= 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::Config("epsilon and alpha must be non-negative".into()));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("need at least 2 nodes, got {}", self.n)));
        }
        if self.jobs == 0 || self.mc_tau_max == 0 {
            return Err(Error::Config("jobs and mc_tau_max must be positive".into()));
        }
        let range = self.sweep.range();
        match self.sweep {
            Sweep::GammaSweep { .. } | Sweep::ShiftComparison { .. } if range.min <= 0.0 => {
                return Err(Error::Config("gamma grid must be positive".into()))
            }
            Sweep::EpsilonSweep { .. } | Sweep::AlphaSweep { .. } if range.min < 0.0 => {
                return Err(Error::Config("sweep grid must be non-negative".into()))
            }
            Sweep::AlphaSweep { ensemble, .. } | Sweep::ShiftComparison { ensemble, .. }
                if ensemble == 0 =>
            {
                return Err(Error::Config("ensemble must be positive".into()))
            }
            _ => {}
        }
        // samples per phase must exceed the node count
        for (a, b) in [(self.task.t1, self.task.t2), (self.task.t2, self.task.t3)] {
            let rows = ((b - a) / self.dt).round() as usize;
            if rows <= self.n {
                return Err(Error::Config(format!(
                    "phase [{a}, {b}) has {rows} samples, need more than {}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}
