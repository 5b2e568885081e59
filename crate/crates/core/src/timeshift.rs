//! Per-node readout time-shifts: random draws and the first-order optimized
//! choice.
//!
//! The optimized shifts come from the expansion
//! `r_i(t − τ_i) ≈ r_i(t) − τ_i ṙ_i(t)`: a single ridge fit on the readouts
//! and their derivatives yields coefficients `κ_i` and `λ_i = −κ_i τ_i`,
//! so `τ_i = −λ_i / κ_i`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{TaskDefinition, TimeSeries};
use crate::error::{Error, Result};
use crate::readout::{
    build_matrix, nrmse, ridge_fit, ridge_solve, window_values, ErrorReport, ReadoutModel,
    Window,
};
use crate::reservoir::ReservoirTrajectory;
use crate::seed;

/// Relative size below which a readout coefficient is treated as zero when
/// extracting its shift.
pub const DEGENERATE_KAPPA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    None,
    Random,
    Optimized,
}

impl std::fmt::Display for ShiftMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShiftMode::None => "none",
            ShiftMode::Random => "random",
            ShiftMode::Optimized => "optimized",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftVector {
    pub taus: Vec<f64>,
    pub mode: ShiftMode,
    pub alpha: f64,
    pub clamp_count: usize,
    #[serde(default)]
    pub degenerate_count: usize,
}

impl ShiftVector {
    pub fn none(n: usize) -> Self {
        ShiftVector {
            taus: vec![0.0; n],
            mode: ShiftMode::None,
            alpha: 0.0,
            clamp_count: 0,
            degenerate_count: 0,
        }
    }
}

/// `n` independent draws from `U[0, α·τ̄)`.
pub fn sample_random_shifts(n: usize, alpha: f64, tau_bar: f64, seed: u64) -> Result<ShiftVector> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
    }
    if !(tau_bar > 0.0) || !tau_bar.is_finite() {
        return Err(Error::Config(format!("tau_bar must be positive, got {tau_bar}")));
    }
    let width = alpha * tau_bar;
    let mut rng = seed::rng(seed);
    let taus = (0..n).map(|_| width * rng.gen::<f64>()).collect();
    Ok(ShiftVector {
        taus,
        mode: ShiftMode::Random,
        alpha,
        clamp_count: 0,
        degenerate_count: 0,
    })
}

/// Result of the joint readout/derivative fit.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizedReadout {
    /// `κ*` (readouts then bias) with `λ*` attached, straight from the joint
    /// solve.
    pub joint: ReadoutModel,
    /// `κ` refitted on the matrix shifted by `τ*`.
    pub refit: ReadoutModel,
    pub shifts: ShiftVector,
}

/// Extracts `τ*` from a joint ridge fit over `[Ω_r Ω_ṙ 1]` on `window`,
/// then refits the readout on the shifted matrix.
///
/// Shifts whose magnitude exceeds `max_shift` are clamped to `±max_shift`;
/// nodes whose coefficient is negligible get a zero shift. Both are counted.
pub fn optimize_shifts(
    traj: &ReservoirTrajectory,
    window: Window,
    g: &DVector<f64>,
    eta: f64,
    max_shift: f64,
) -> Result<OptimizedReadout> {
    if !(max_shift >= 0.0) {
        return Err(Error::Config(format!("max_shift must be non-negative, got {max_shift}")));
    }
    let n = traj.n_nodes();
    let omega_opt = build_matrix(traj, window, &vec![0.0; n], true)?;
    let solution = ridge_solve(&omega_opt.matrix, g, eta)?;
    let kappa = &solution.as_slice()[..n];
    let lambda = &solution.as_slice()[n..2 * n];
    let bias = solution[2 * n];

    let kappa_max = kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let mut clamp_count = 0;
    let mut degenerate_count = 0;
    let taus: Vec<f64> = kappa
        .iter()
        .zip(lambda)
        .map(|(&k, &l)| {
            if !(k.abs() >= DEGENERATE_KAPPA * kappa_max) || kappa_max == 0.0 {
                degenerate_count += 1;
                return 0.0;
            }
            let tau = -l / k;
            if tau.abs() > max_shift {
                clamp_count += 1;
                max_shift.copysign(tau)
            } else {
                tau
            }
        })
        .collect();

    let mut kappa_joint = kappa.to_vec();
    kappa_joint.push(bias);
    let joint = ReadoutModel {
        kappa: kappa_joint,
        eta,
        shifts: taus.clone(),
        lambda: Some(lambda.to_vec()),
    };
    let shifted = build_matrix(traj, window, &taus, false)?;
    let refit = ridge_fit(&shifted, g, eta)?;

    Ok(OptimizedReadout {
        joint,
        refit,
        shifts: ShiftVector {
            taus,
            mode: ShiftMode::Optimized,
            alpha: 0.0,
            clamp_count,
            degenerate_count,
        },
    })
}

/// Extra outputs of an optimized-shift evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedDiagnostics {
    /// Errors obtained by applying the joint-fit `κ*` directly to the
    /// shifted matrices.
    pub delta_tr_joint: f64,
    pub delta_ts_joint: f64,
    pub clamp_count: usize,
    pub degenerate_count: usize,
    pub kappa_joint: Vec<f64>,
    pub kappa_refit: Vec<f64>,
    pub lambda: Vec<f64>,
    pub taus: Vec<f64>,
}

pub fn training_window(task: &TaskDefinition) -> Window {
    Window::new(task.t1, task.t2)
}

pub fn testing_window(task: &TaskDefinition) -> Window {
    Window::new(task.t2, task.t3)
}

fn report(traj: &ReservoirTrajectory, delta_tr: f64, delta_ts: f64, shifts: &ShiftVector) -> ErrorReport {
    ErrorReport {
        delta_tr,
        delta_ts,
        seed: traj.seed,
        gamma: traj.gamma,
        epsilon: traj.epsilon,
        alpha: shifts.alpha,
        shift_mode: shifts.mode,
        optimized: None,
    }
}

/// Fits on the shifted training window and scores the same coefficients and
/// shifts on the testing window.
pub fn evaluate(
    traj: &ReservoirTrajectory,
    task: &TaskDefinition,
    target: &TimeSeries,
    shifts: &ShiftVector,
    eta: f64,
) -> Result<ErrorReport> {
    let (train, test) = (training_window(task), testing_window(task));
    let g_tr = window_values(target, train)?;
    let g_ts = window_values(target, test)?;

    let omega_tr = build_matrix(traj, train, &shifts.taus, false)?;
    let model = ridge_fit(&omega_tr, &g_tr, eta)?;
    let h_tr = model.predict(&omega_tr)?;
    let omega_ts = build_matrix(traj, test, &shifts.taus, false)?;
    let h_ts = model.predict(&omega_ts)?;

    Ok(report(
        traj,
        nrmse(h_tr.as_slice(), g_tr.as_slice())?,
        nrmse(h_ts.as_slice(), g_ts.as_slice())?,
        shifts,
    ))
}

/// Optimizes shifts on the training window and scores them. The reported
/// errors use the refitted coefficients; the joint-fit variant is kept in
/// the diagnostics.
pub fn evaluate_optimized(
    traj: &ReservoirTrajectory,
    task: &TaskDefinition,
    target: &TimeSeries,
    eta: f64,
    max_shift: f64,
) -> Result<ErrorReport> {
    let (train, test) = (training_window(task), testing_window(task));
    let g_tr = window_values(target, train)?;
    let g_ts = window_values(target, test)?;

    let opt = optimize_shifts(traj, train, &g_tr, eta, max_shift)?;
    let omega_tr = build_matrix(traj, train, &opt.shifts.taus, false)?;
    let omega_ts = build_matrix(traj, test, &opt.shifts.taus, false)?;

    let score = |model: &ReadoutModel| -> Result<(f64, f64)> {
        let h_tr = model.predict(&omega_tr)?;
        let h_ts = model.predict(&omega_ts)?;
        Ok((
            nrmse(h_tr.as_slice(), g_tr.as_slice())?,
            nrmse(h_ts.as_slice(), g_ts.as_slice())?,
        ))
    };
    let (delta_tr, delta_ts) = score(&opt.refit)?;
    let (delta_tr_joint, delta_ts_joint) = score(&opt.joint)?;

    let mut out = report(traj, delta_tr, delta_ts, &opt.shifts);
    out.optimized = Some(OptimizedDiagnostics {
        delta_tr_joint,
        delta_ts_joint,
        clamp_count: opt.shifts.clamp_count,
        degenerate_count: opt.shifts.degenerate_count,
        kappa_joint: opt.joint.kappa.clone(),
        kappa_refit: opt.refit.kappa.clone(),
        lambda: opt.joint.lambda.clone().unwrap_or_default(),
        taus: opt.shifts.taus.clone(),
    });
    Ok(out)
}
