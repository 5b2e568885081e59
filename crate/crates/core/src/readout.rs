//! Readout matrices, ridge regression and error measures.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::reservoir::ReservoirTrajectory;
use crate::timeshift::{OptimizedDiagnostics, ShiftMode};

/// Ridge parameter used throughout unless overridden.
pub const DEFAULT_ETA: f64 = 1e-6;

/// Half-open time interval `[start, end)` on the integration grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Window { start, end }
    }

    pub fn start_step(&self, dt: f64) -> usize {
        (self.start / dt).round() as usize
    }

    /// Number of samples `T` in the window.
    pub fn rows(&self, dt: f64) -> usize {
        ((self.end / dt).round() as usize).saturating_sub(self.start_step(dt))
    }
}

/// Rounds a continuous shift to whole steps, ties away from negative
/// infinity (round half up).
pub fn shift_steps(tau: f64, dt: f64) -> i64 {
    (tau / dt + 0.5).floor() as i64
}

/// Design matrix `T × (N+1)`, or `T × (2N+1)` with derivative columns:
/// `[r_1(t−τ_1) .. r_N(t−τ_N) | ṙ_1(t) .. ṙ_N(t) | 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutMatrix {
    pub matrix: DMatrix<f64>,
    pub window: Window,
    pub start_step: usize,
    pub shifts: Vec<f64>,
    pub shift_steps: Vec<i64>,
    pub with_derivatives: bool,
}

impl ReadoutMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.shifts.len()
    }
}

pub fn build_matrix(
    traj: &ReservoirTrajectory,
    window: Window,
    shifts: &[f64],
    include_derivatives: bool,
) -> Result<ReadoutMatrix> {
    let n = traj.n_nodes();
    if shifts.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: shifts.len(),
        });
    }
    let dt = traj.dt;
    let start_step = window.start_step(dt);
    let t = window.rows(dt);
    if t <= n {
        return Err(Error::Config(format!(
            "window [{}, {}) holds {t} samples, need more than {n}",
            window.start, window.end
        )));
    }
    let base = start_step as i64 - traj.first_step as i64;
    let samples = traj.samples() as i64;
    // derivative columns are unshifted
    if include_derivatives && (base < 0 || base + t as i64 > samples) {
        return Err(Error::BufferExceeded { node: 0, shift: 0.0 });
    }

    let cols = if include_derivatives { 2 * n + 1 } else { n + 1 };
    let mut matrix = DMatrix::<f64>::zeros(t, cols);
    let mut steps = Vec::with_capacity(n);
    for (i, &tau) in shifts.iter().enumerate() {
        if !tau.is_finite() {
            return Err(Error::Config(format!("shift of node {i} is not finite")));
        }
        let m = shift_steps(tau, dt);
        let src = base - m;
        if src < 0 || src + t as i64 > samples {
            return Err(Error::BufferExceeded { node: i, shift: tau });
        }
        let src = src as usize;
        matrix
            .column_mut(i)
            .copy_from(&traj.states.view((src, i), (t, 1)));
        if include_derivatives {
            matrix
                .column_mut(n + i)
                .copy_from(&traj.derivatives.view((base as usize, i), (t, 1)));
        }
        steps.push(m);
    }
    matrix.column_mut(cols - 1).fill(1.0);

    Ok(ReadoutMatrix {
        matrix,
        window,
        start_step,
        shifts: shifts.to_vec(),
        shift_steps: steps,
        with_derivatives: include_derivatives,
    })
}

/// Samples of `signal` on the window grid.
pub fn window_values(signal: &TimeSeries, window: Window) -> Result<DVector<f64>> {
    let values = signal.as_scalar()?;
    let dt = signal.dt;
    let offset = (signal.t_start / dt).round() as i64;
    let start = window.start_step(dt) as i64 - offset;
    let rows = window.rows(dt);
    if start < 0 || start as usize + rows > values.len() {
        return Err(Error::Config(format!(
            "signal does not cover window [{}, {})",
            window.start, window.end
        )));
    }
    let start = start as usize;
    Ok(DVector::from_column_slice(&values[start..start + rows]))
}

/// Factorised `ΩᵀΩ + ηI`, reusable across several targets.
pub struct RidgeSystem {
    factor: Cholesky<f64, Dyn>,
    omega_t: DMatrix<f64>,
    eta: f64,
}

impl RidgeSystem {
    pub fn new(omega: &DMatrix<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Config(format!("ridge parameter must be positive, got {eta}")));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("design matrix has non-finite entries".into()));
        }
        let omega_t = omega.transpose();
        let mut gram = &omega_t * omega;
        for i in 0..gram.nrows() {
            gram[(i, i)] += eta;
        }
        let factor = Cholesky::new(gram)
            .ok_or_else(|| Error::Numerical("ridge normal matrix is not positive definite".into()))?;
        Ok(RidgeSystem { factor, omega_t, eta })
    }

    pub fn solve(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        if g.len() != self.omega_t.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.omega_t.ncols(),
                got: g.len(),
            });
        }
        let mut kappa = self.factor.solve(&(&self.omega_t * g));
        // one refinement step against Ωᵀ(g − Ωκ) − ηκ recovers the accuracy
        // lost by forming the normal matrix
        let residual = g - self.omega_t.tr_mul(&kappa);
        kappa += self.factor.solve(&(&self.omega_t * residual - &kappa * self.eta));
        if kappa.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("ridge solution is not finite".into()));
        }
        Ok(kappa)
    }

    /// One solution column per target column.
    pub fn solve_many(&self, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if targets.nrows() != self.omega_t.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.omega_t.ncols(),
                got: targets.nrows(),
            });
        }
        let mut k = self.factor.solve(&(&self.omega_t * targets));
        let residual = targets - self.omega_t.tr_mul(&k);
        k += self.factor.solve(&(&self.omega_t * residual - &k * self.eta));
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("ridge solution is not finite".into()));
        }
        Ok(k)
    }
}

/// `κ = (ΩᵀΩ + ηI)⁻¹ Ωᵀ g`. Every coefficient, the bias included, carries
/// the same penalty.
pub fn ridge_solve(omega: &DMatrix<f64>, g: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if g.len() != omega.nrows() {
        return Err(Error::DimensionMismatch {
            expected: omega.nrows(),
            got: g.len(),
        });
    }
    RidgeSystem::new(omega, eta)?.solve(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub kappa: Vec<f64>,
    pub eta: f64,
    pub shifts: Vec<f64>,
    /// Derivative coefficients of a joint fit, before shift extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl ReadoutModel {
    pub fn predict(&self, omega: &ReadoutMatrix) -> Result<DVector<f64>> {
        if omega.matrix.ncols() != self.kappa.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kappa.len(),
                got: omega.matrix.ncols(),
            });
        }
        Ok(&omega.matrix * DVector::from_column_slice(&self.kappa))
    }
}

pub fn ridge_fit(omega: &ReadoutMatrix, g: &DVector<f64>, eta: f64) -> Result<ReadoutModel> {
    let kappa = ridge_solve(&omega.matrix, g, eta)?;
    Ok(ReadoutModel {
        kappa: kappa.as_slice().to_vec(),
        eta,
        shifts: omega.shifts.clone(),
        lambda: None,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `⟨X⟩`: population standard deviation about the mean.
pub fn spread(x: &[f64]) -> f64 {
    let mu = mean(x);
    (x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Normalised error `⟨h − g⟩ / ⟨g⟩`.
pub fn nrmse(h: &[f64], g: &[f64]) -> Result<f64> {
    if h.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: h.len(),
        });
    }
    if g.len() < 2 {
        return Err(Error::Config("error needs at least two samples".into()));
    }
    let scale = spread(g);
    if !(scale > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let residual: Vec<f64> = h.iter().zip(g).map(|(a, b)| a - b).collect();
    Ok(spread(&residual) / scale)
}

/// Training and testing error of one experiment, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub delta_tr: f64,
    pub delta_ts: f64,
    pub seed: u64,
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub shift_mode: ShiftMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimized: Option<OptimizedDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryCapacity {
    pub total: f64,
    /// `MC_τ` for `τ = 1..=tau_max` steps.
    pub curve: Vec<f64>,
    /// Sum over the last tenth of the lags, to audit truncation.
    pub tail: f64,
}

/// Sum over lags of the squared correlation between the delayed input and
/// its best ridge reconstruction from the unshifted readouts.
///
/// All lags share one factorisation, so the per-lag fits are exactly the
/// independent fits the definition asks for.
pub fn memory_capacity(
    traj: &ReservoirTrajectory,
    input: &TimeSeries,
    window: Window,
    tau_max_steps: usize,
    eta: f64,
) -> Result<MemoryCapacity> {
    if tau_max_steps == 0 {
        return Err(Error::Config("memory capacity needs at least one lag".into()));
    }
    let omega = build_matrix(traj, window, &vec![0.0; traj.n_nodes()], false)?;
    let t = omega.rows();
    let values = input.as_scalar()?;
    let offset = (input.t_start / input.dt).round() as i64;
    let start = omega.start_step as i64 - offset;
    if start < tau_max_steps as i64 || start as usize + t > values.len() {
        return Err(Error::Config(format!(
            "input does not cover {tau_max_steps} lags before the window"
        )));
    }
    let start = start as usize;
    let delayed = DMatrix::from_fn(t, tau_max_steps, |k, lag| values[start + k - (lag + 1)]);

    let system = RidgeSystem::new(&omega.matrix, eta)?;
    let fits = &omega.matrix * system.solve_many(&delayed)?;

    let curve: Vec<f64> = (0..tau_max_steps)
        .map(|lag| {
            let x: Vec<f64> = delayed.column(lag).iter().copied().collect();
            let h: Vec<f64> = fits.column(lag).iter().copied().collect();
            squared_correlation(&x, &h)
        })
        .collect();
    let tail_len = (tau_max_steps / 10).max(1);
    Ok(MemoryCapacity {
        total: curve.iter().sum(),
        tail: curve[tau_max_steps - tail_len..].iter().sum(),
        curve,
    })
}

/// `cov²(x, h) / (var x · var h)`, zero when either side is constant.
pub fn squared_correlation(x: &[f64], h: &[f64]) -> f64 {
    let mx = mean(x);
    let mh = mean(h);
    let (mut sxx, mut shh, mut sxh) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(h) {
        let (da, db) = (a - mx, b - mh);
        sxx += da * da;
        shh += db * db;
        sxh += da * db;
    }
    if !(sxx > 0.0) || !(shh > 0.0) {
        return 0.0;
    }
    (sxh * sxh / (sxx * shh)).min(1.0)
}
