#![allow(dead_code)]

use shiftres::dynamics::{TaskDefinition, TaskSignals};
use shiftres::reservoir::{drive, ReservoirConfig, ReservoirTrajectory};

pub const DT: f64 = 0.01;

/// Short Lorenz task: train on [20, 30), test on [30, 35).
pub fn short_task() -> TaskDefinition {
    let mut task = TaskDefinition::lorenz();
    task.t1 = 20.0;
    task.t2 = 30.0;
    task.t3 = 35.0;
    task
}

pub struct Fixture {
    pub task: TaskDefinition,
    pub signals: TaskSignals,
    pub network: ReservoirConfig,
    pub traj: ReservoirTrajectory,
}

/// 20-node reservoir driven by the short task, recorded on
/// `[t1 − margin, t3 + margin]`.
pub fn fixture(margin: f64) -> Fixture {
    let task = short_task();
    let signals = task.simulate(DT, task.t3 + margin, 11).unwrap();
    let network = ReservoirConfig::new(20, 1.0, 1.5, DT, 5).unwrap();
    let traj = drive(&network, &signals.input, task.t1 - margin, task.t3 + margin).unwrap();
    Fixture {
        task,
        signals,
        network,
        traj,
    }
}

/// Slower Lorenz96 drive at its usual rates, for smoothness checks.
pub fn smooth_fixture(margin: f64) -> Fixture {
    let mut task = TaskDefinition::lorenz96();
    task.t1 = 20.0;
    task.t2 = 30.0;
    task.t3 = 35.0;
    let signals = task.simulate(DT, task.t3 + margin, 11).unwrap();
    let network = ReservoirConfig::new(20, 0.8, 0.9, DT, 5).unwrap();
    let traj = drive(&network, &signals.input, task.t1 - margin, task.t3 + margin).unwrap();
    Fixture {
        task,
        signals,
        network,
        traj,
    }
}

pub mod measure {
    use nalgebra::{DMatrix, DVector};
    use shiftres::dynamics::{integrate, VectorField};
    use shiftres::readout::{nrmse, ridge_solve};
    use shiftres::reservoir::ReservoirTrajectory;
    use shiftres::timeshift::{evaluate, training_window, ShiftVector};

    use super::{Fixture, DT};

    struct Oscillator;

    impl VectorField for Oscillator {
        fn dimension(&self) -> usize {
            2
        }

        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[1];
            out[1] = -x[0];
        }
    }

    /// Error at `t = 10` for step 0.1 over error for step 0.05.
    pub fn rk4_ratio() -> f64 {
        let err = |dt: f64| {
            let s = integrate(&Oscillator, &[1.0, 0.0], dt, 10.0).unwrap();
            let last = s.len() - 1;
            (s.values[(last, 0)] - 10f64.cos()).abs()
        };
        err(0.1) / err(0.05)
    }

    /// Least squares on `[Ω; √η I] κ ≈ [g; 0]` by Householder QR.
    pub fn qr_ridge(omega: &DMatrix<f64>, g: &DVector<f64>, eta: f64) -> DVector<f64> {
        let (t, p) = omega.shape();
        let mut a = DMatrix::zeros(t + p, p);
        a.view_mut((0, 0), (t, p)).copy_from(omega);
        for i in 0..p {
            a[(t + i, i)] = eta.sqrt();
        }
        let mut b = DVector::zeros(t + p);
        b.rows_mut(0, t).copy_from(g);
        let qr = a.qr();
        let qtb = qr.q().transpose() * b;
        qr.r().solve_upper_triangular(&qtb).unwrap()
    }

    /// Relative distance between the ridge solution and the QR oracle.
    pub fn ridge_oracle_gap(omega: &DMatrix<f64>, g: &DVector<f64>, eta: f64) -> f64 {
        let kappa = ridge_solve(omega, g, eta).unwrap();
        let oracle = qr_ridge(omega, g, eta);
        (&kappa - &oracle).norm() / oracle.norm()
    }

    /// Log-log slope of `max |r(t−τ) − r(t) + τ ṙ(t)|` over the training
    /// window for `τ ∈ {1, 2, 4, 8}·dt`.
    pub fn taylor_slope(f: &Fixture) -> f64 {
        let traj = &f.traj;
        let window = training_window(&f.task);
        let base = window.start_step(DT) - traj.first_step;
        let rows = window.rows(DT);
        let error = |m: usize| {
            let tau = m as f64 * DT;
            let mut worst = 0.0f64;
            for i in 0..traj.n_nodes() {
                for k in base..base + rows {
                    let exact = traj.states[(k - m, i)];
                    let linear = traj.states[(k, i)] - tau * traj.derivatives[(k, i)];
                    worst = worst.max((exact - linear).abs());
                }
            }
            worst
        };
        let points: Vec<(f64, f64)> = [1, 2, 4, 8]
            .iter()
            .map(|&m| ((m as f64 * DT).ln(), error(m).ln()))
            .collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    }

    /// Readouts on `[start, end)` with a ones column, and the target there.
    fn plain(f: &Fixture, traj: &ReservoirTrajectory, start: f64, end: f64) -> (DMatrix<f64>, DVector<f64>) {
        let n = traj.n_nodes();
        let first = (start / DT).round() as usize - traj.first_step;
        let rows = ((end - start) / DT).round() as usize;
        let mut m = DMatrix::from_element(rows, n + 1, 1.0);
        m.view_mut((0, 0), (rows, n))
            .copy_from(&traj.states.view((first, 0), (rows, n)));
        let g = f.signals.target.as_scalar().unwrap();
        let first_g = (start / DT).round() as usize;
        (m, DVector::from_column_slice(&g[first_g..first_g + rows]))
    }

    /// Whether the zero-shift pipeline reproduces a plain unshifted fit bit
    /// for bit.
    pub fn zero_shift_is_plain(f: &Fixture, eta: f64) -> bool {
        let n = f.traj.n_nodes();
        let report = evaluate(&f.traj, &f.task, &f.signals.target, &ShiftVector::none(n), eta).unwrap();
        let (om_tr, g_tr) = plain(f, &f.traj, f.task.t1, f.task.t2);
        let (om_ts, g_ts) = plain(f, &f.traj, f.task.t2, f.task.t3);
        let kappa = ridge_solve(&om_tr, &g_tr, eta).unwrap();
        let d_tr = nrmse((&om_tr * &kappa).as_slice(), g_tr.as_slice()).unwrap();
        let d_ts = nrmse((&om_ts * &kappa).as_slice(), g_ts.as_slice()).unwrap();
        report.delta_tr.to_bits() == d_tr.to_bits() && report.delta_ts.to_bits() == d_ts.to_bits()
    }
}
