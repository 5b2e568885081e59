//! Sweep runners.
//!
//! Every grid point is evaluated independently from immutable shared data
//! (task signals, network), so results do not depend on evaluation order or
//! on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Sweep, SweepKind, TauBar};
use crate::dynamics::{autocorrelation_timescale_of, TaskSignals};
use crate::error::{Error, Result};
use crate::readout::{memory_capacity, window_values, ErrorReport, MemoryCapacity};
use crate::reservoir::{drive, ReservoirConfig, ReservoirTrajectory};
use crate::seed::{self, STREAM_RESERVOIR, STREAM_SHIFTS, STREAM_TASK_IC};
use crate::timeshift::{
    evaluate, evaluate_optimized, sample_random_shifts, training_window, OptimizedDiagnostics,
    ShiftMode, ShiftVector,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub shift_mode: ShiftMode,
    pub mean_delta_tr: Option<f64>,
    pub std_delta_tr: Option<f64>,
    pub mean_delta_ts: Option<f64>,
    pub std_delta_ts: Option<f64>,
    pub ensemble: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_capacity: Option<MemoryCapacity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimized: Option<OptimizedDiagnostics>,
    /// Why the row has no values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SweepRow {
    fn from_reports(value: f64, mode: ShiftMode, reports: &[ErrorReport], seed: u64) -> Self {
        let tr: Vec<f64> = reports.iter().map(|r| r.delta_tr).collect();
        let ts: Vec<f64> = reports.iter().map(|r| r.delta_ts).collect();
        let (mean_tr, std_tr) = mean_std(&tr);
        let (mean_ts, std_ts) = mean_std(&ts);
        SweepRow {
            value,
            shift_mode: mode,
            mean_delta_tr: Some(mean_tr),
            std_delta_tr: Some(std_tr),
            mean_delta_ts: Some(mean_ts),
            std_delta_ts: Some(std_ts),
            ensemble: reports.len(),
            seed,
            memory_capacity: None,
            optimized: None,
            note: None,
        }
    }

    fn missing(value: f64, mode: ShiftMode, ensemble: usize, seed: u64, err: &Error) -> Self {
        SweepRow {
            value,
            shift_mode: mode,
            mean_delta_tr: None,
            std_delta_tr: None,
            mean_delta_ts: None,
            std_delta_ts: None,
            ensemble,
            seed,
            memory_capacity: None,
            optimized: None,
            note: Some(err.to_string()),
        }
    }

    pub fn is_missing(&self) -> bool {
        self.mean_delta_tr.is_none()
    }
}

/// Population mean and standard deviation.
fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sweep_param: String,
    /// Timescale used for the random-shift range.
    pub tau_bar: f64,
    /// argmin Δ_tr (gamma), argmax MC (epsilon) or argmin mean Δ_ts (alpha).
    pub best: Option<f64>,
    pub rows: Vec<SweepRow>,
    pub config: ExperimentConfig,
}

impl SweepResult {
    pub fn rows_for(&self, mode: ShiftMode) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.shift_mode == mode)
    }

    pub fn all_missing(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(SweepRow::is_missing)
    }
}

/// Steps of recorded margin on each side of `[t1, t3]` for shifts up to
/// `α·τ̄`: `ceil(5·α·τ̄ / dt)`.
pub fn buffer_steps(alpha: f64, tau_bar: f64, dt: f64) -> usize {
    (5.0 * alpha * tau_bar / dt).ceil() as usize
}

/// Immutable data shared by every point of a sweep.
pub struct Experiment<'a> {
    pub config: &'a ExperimentConfig,
    pub network: ReservoirConfig,
    pub signals: TaskSignals,
    pub tau_bar: f64,
    pub buffer_steps: usize,
}

impl<'a> Experiment<'a> {
    /// Builds the network and integrates the task with enough margin for
    /// shifts up to `max_alpha·τ̄`.
    pub fn prepare(config: &'a ExperimentConfig, max_alpha: f64) -> Result<Self> {
        config.validate()?;
        let task = &config.task;
        let ic_seed = seed::derive(config.seed, STREAM_TASK_IC, 0);
        let tau_bar = match config.tau_bar {
            TauBar::Fixed(v) => v,
            TauBar::Auto => {
                let signals = task.simulate(config.dt, task.t3, ic_seed)?;
                let values = signals.input.as_scalar()?;
                let start = (task.t1 / config.dt).round() as usize;
                autocorrelation_timescale_of(&values[start..], config.dt)?
            }
        };
        let buffer_steps = buffer_steps(max_alpha, tau_bar, config.dt);
        let signals = task.simulate(
            config.dt,
            task.t3 + buffer_steps as f64 * config.dt,
            ic_seed,
        )?;
        let network = ReservoirConfig::new(
            config.n,
            config.epsilon,
            config.gamma,
            config.dt,
            seed::derive(config.seed, STREAM_RESERVOIR, 0),
        )?;
        Ok(Experiment {
            config,
            network,
            signals,
            tau_bar,
            buffer_steps,
        })
    }

    pub fn buffer(&self) -> f64 {
        self.buffer_steps as f64 * self.config.dt
    }

    /// Records `[t1 − B, t3 + B]` for the given rates.
    pub fn trajectory(&self, gamma: f64, epsilon: f64) -> Result<ReservoirTrajectory> {
        let task = &self.config.task;
        let b = self.buffer();
        let network = self.network.with_rates(epsilon, gamma)?;
        drive(&network, &self.signals.input, (task.t1 - b).max(0.0), task.t3 + b)
    }

    /// Same experiment with a wider recording margin.
    fn widened(&self, buffer_steps: usize) -> Result<Self> {
        let task = &self.config.task;
        let signals = task.simulate(
            self.config.dt,
            task.t3 + buffer_steps as f64 * self.config.dt,
            seed::derive(self.config.seed, STREAM_TASK_IC, 0),
        )?;
        Ok(Experiment {
            config: self.config,
            network: self.network.clone(),
            signals,
            tau_bar: self.tau_bar,
            buffer_steps,
        })
    }

    pub fn baseline(&self, traj: &ReservoirTrajectory) -> Result<ErrorReport> {
        evaluate(
            traj,
            &self.config.task,
            &self.signals.target,
            &ShiftVector::none(self.config.n),
            self.config.eta,
        )
    }

    /// Shift vector `k` of the ensemble at `alpha`. Draws depend on `k` only
    /// through the seed ladder, so every α reuses the same unit draws.
    pub fn random_shifts(&self, alpha: f64, k: usize) -> Result<ShiftVector> {
        sample_random_shifts(
            self.config.n,
            alpha,
            self.tau_bar,
            seed::derive(self.config.seed, STREAM_SHIFTS, k as u64),
        )
    }

    pub fn random_ensemble(
        &self,
        traj: &ReservoirTrajectory,
        alpha: f64,
        ensemble: usize,
    ) -> Result<Vec<ErrorReport>> {
        (0..ensemble)
            .into_par_iter()
            .map(|k| {
                let shifts = self.random_shifts(alpha, k)?;
                evaluate(traj, &self.config.task, &self.signals.target, &shifts, self.config.eta)
            })
            .collect()
    }

    pub fn optimized(&self, traj: &ReservoirTrajectory) -> Result<ErrorReport> {
        evaluate_optimized(
            traj,
            &self.config.task,
            &self.signals.target,
            self.config.eta,
            self.buffer(),
        )
    }

    pub fn memory_capacity(&self, traj: &ReservoirTrajectory) -> Result<MemoryCapacity> {
        memory_capacity(
            traj,
            &self.signals.input,
            training_window(&self.config.task),
            self.config.mc_tau_max,
            self.config.eta,
        )
    }

    /// Target samples over the training window, for callers that fit
    /// readouts directly.
    pub fn training_target(&self) -> Result<nalgebra::DVector<f64>> {
        window_values(&self.signals.target, training_window(&self.config.task))
    }
}

/// Divergence at one grid point is recorded and the sweep moves on; any
/// other failure aborts the sweep.
fn recoverable(err: &Error) -> bool {
    matches!(err, Error::Diverged { .. } | Error::Numerical(_))
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

fn argbest(rows: &[SweepRow], key: impl Fn(&SweepRow) -> Option<f64>, maximize: bool) -> Option<f64> {
    rows.iter()
        .filter_map(|r| key(r).map(|k| (r.value, k)))
        .filter(|(_, k)| k.is_finite())
        .fold(None, |best: Option<(f64, f64)>, (v, k)| match best {
            Some((_, bk)) if (maximize && k <= bk) || (!maximize && k >= bk) => best,
            _ => Some((v, k)),
        })
        .map(|(v, _)| v)
}

/// Baseline training error over a γ grid at fixed ε.
pub fn run_gamma_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let Sweep::GammaSweep { range } = &config.sweep else {
        return Err(Error::Config("not a gamma sweep".into()));
    };
    let exp = Experiment::prepare(config, 0.0)?;
    let rows = in_pool(config.jobs, || {
        range
            .grid()
            .into_par_iter()
            .map(|gamma| {
                let outcome = exp
                    .trajectory(gamma, config.epsilon)
                    .and_then(|traj| exp.baseline(&traj));
                match outcome {
                    Ok(report) => Ok(SweepRow::from_reports(gamma, ShiftMode::None, &[report], config.seed)),
                    Err(e) if recoverable(&e) => {
                        Ok(SweepRow::missing(gamma, ShiftMode::None, 1, config.seed, &e))
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepResult {
        sweep_param: SweepKind::Gamma.to_string(),
        tau_bar: exp.tau_bar,
        best: argbest(&rows, |r| r.mean_delta_tr, false),
        rows,
        config: config.clone(),
    })
}

/// Memory capacity (and baseline errors) over an ε grid at fixed γ.
pub fn run_epsilon_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let Sweep::EpsilonSweep { range } = &config.sweep else {
        return Err(Error::Config("not an epsilon sweep".into()));
    };
    let exp = Experiment::prepare(config, 0.0)?;
    let rows = in_pool(config.jobs, || {
        range
            .grid()
            .into_par_iter()
            .map(|epsilon| {
                let outcome = exp.trajectory(config.gamma, epsilon).and_then(|traj| {
                    let mc = exp.memory_capacity(&traj)?;
                    Ok((exp.baseline(&traj)?, mc))
                });
                match outcome {
                    Ok((report, mc)) => {
                        let mut row =
                            SweepRow::from_reports(epsilon, ShiftMode::None, &[report], config.seed);
                        row.memory_capacity = Some(mc);
                        Ok(row)
                    }
                    Err(e) if recoverable(&e) => {
                        Ok(SweepRow::missing(epsilon, ShiftMode::None, 1, config.seed, &e))
                    }
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepResult {
        sweep_param: SweepKind::Epsilon.to_string(),
        tau_bar: exp.tau_bar,
        best: argbest(&rows, |r| r.memory_capacity.as_ref().map(|m| m.total), true),
        rows,
        config: config.clone(),
    })
}

/// Random-shift ensembles over an α grid, all evaluated on one reservoir
/// trajectory.
pub fn run_alpha_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let Sweep::AlphaSweep { range, ensemble } = &config.sweep else {
        return Err(Error::Config("not an alpha sweep".into()));
    };
    let grid = range.grid();
    let mut exp = Experiment::prepare(config, range.max)?;
    let rows = loop {
        let traj = exp.trajectory(config.gamma, config.epsilon)?;
        let attempt = in_pool(config.jobs, || {
            grid.par_iter()
                .map(|&alpha| {
                    let reports = exp.random_ensemble(&traj, alpha, *ensemble)?;
                    Ok(SweepRow::from_reports(alpha, ShiftMode::Random, &reports, config.seed))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        match attempt {
            Err(Error::BufferExceeded { node, shift }) => {
                let wider = (exp.buffer_steps * 2).max(1);
                eprintln!(
                    "shift {shift} of node {node} exceeds the recorded margin; \
                     re-simulating with {wider} buffer steps"
                );
                exp = exp.widened(wider)?;
            }
            other => break other?,
        }
    };
    Ok(SweepResult {
        sweep_param: SweepKind::Alpha.to_string(),
        tau_bar: exp.tau_bar,
        best: argbest(&rows, |r| r.mean_delta_ts, false),
        rows,
        config: config.clone(),
    })
}

/// No shifts, random shifts and optimized shifts over a γ grid.
///
/// The recording margin covers `max(α, 1)·τ̄` so that optimized shifts have
/// room even when the random range is narrow.
pub fn run_shift_comparison(config: &ExperimentConfig) -> Result<SweepResult> {
    let Sweep::ShiftComparison {
        gamma_range,
        alpha,
        ensemble,
    } = &config.sweep
    else {
        return Err(Error::Config("not a shift comparison".into()));
    };
    let exp = Experiment::prepare(config, alpha.max(1.0))?;
    let per_gamma = in_pool(config.jobs, || {
        gamma_range
            .grid()
            .into_par_iter()
            .map(|gamma| compare_at(&exp, gamma, *alpha, *ensemble))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepResult {
        sweep_param: SweepKind::Gamma.to_string(),
        tau_bar: exp.tau_bar,
        best: None,
        rows: per_gamma.into_iter().flatten().collect(),
        config: config.clone(),
    })
}

/// The three rows (none, random, optimized) of one comparison grid point.
pub fn compare_at(exp: &Experiment<'_>, gamma: f64, alpha: f64, ensemble: usize) -> Result<Vec<SweepRow>> {
    let config = exp.config;
    let outcome = exp.trajectory(gamma, config.epsilon).and_then(|traj| {
        let none = exp.baseline(&traj)?;
        let random = exp.random_ensemble(&traj, alpha, ensemble)?;
        let optimized = exp.optimized(&traj)?;
        Ok((none, random, optimized))
    });
    match outcome {
        Ok((none, random, mut optimized)) => {
            let mut opt_row =
                SweepRow::from_reports(gamma, ShiftMode::Optimized, &[optimized.clone()], config.seed);
            opt_row.optimized = optimized.optimized.take();
            Ok(vec![
                SweepRow::from_reports(gamma, ShiftMode::None, &[none], config.seed),
                SweepRow::from_reports(gamma, ShiftMode::Random, &random, config.seed),
                opt_row,
            ])
        }
        Err(e) if recoverable(&e) => Ok(vec![
            SweepRow::missing(gamma, ShiftMode::None, 1, config.seed, &e),
            SweepRow::missing(gamma, ShiftMode::Random, ensemble, config.seed, &e),
            SweepRow::missing(gamma, ShiftMode::Optimized, 1, config.seed, &e),
        ]),
        Err(e) => Err(e),
    }
}

pub fn run(config: &ExperimentConfig) -> Result<SweepResult> {
    match config.sweep.kind() {
        SweepKind::Gamma => run_gamma_sweep(config),
        SweepKind::Epsilon => run_epsilon_sweep(config),
        SweepKind::Alpha => run_alpha_sweep(config),
        SweepKind::Compare => run_shift_comparison(config),
    }
}
