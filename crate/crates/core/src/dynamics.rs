//! Chaotic benchmark systems and their fixed-step integration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Hindmarsh-Rose drive of the literal equations.
pub const HR_LITERAL_CURRENT: f64 = 1.0;
/// Standard drive for chaotic bursting.
pub const HR_CHAOTIC_CURRENT: f64 = 3.25;

/// An autonomous ODE `ẋ = f(x)`.
pub trait VectorField {
    fn dimension(&self) -> usize;
    fn eval(&self, state: &[f64], out: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChaoticSystem {
    /// `ẋ_i = (x_{i+1} − x_{i−2}) x_{i−1} − x_i + F`, cyclic in `i`.
    Lorenz96 { forcing: f64, nodes: usize },
    Lorenz { c1: f64, c2: f64, c3: f64 },
    /// `ẋ = y + φ(x) − z + I`, `ẏ = ψ(x) − y`, `ż = 5·10⁻³(4(x + 8/5) − z)`
    /// with `φ(x) = −x³ + 3x²`, `ψ(x) = 1 − 5x²` and constant drive `I`.
    HindmarshRose { current: f64 },
}

impl ChaoticSystem {
    pub fn lorenz96() -> Self {
        ChaoticSystem::Lorenz96 {
            forcing: 8.0,
            nodes: 4,
        }
    }

    pub fn lorenz() -> Self {
        ChaoticSystem::Lorenz {
            c1: 10.0,
            c2: 28.0,
            c3: 8.0 / 3.0,
        }
    }

    /// Hindmarsh-Rose in its chaotic bursting regime.
    pub fn hindmarsh_rose() -> Self {
        ChaoticSystem::HindmarshRose {
            current: HR_CHAOTIC_CURRENT,
        }
    }

    /// Hindmarsh-Rose with the unit drive of the literal equations. This
    /// setting relaxes to a stable equilibrium.
    pub fn hindmarsh_rose_literal() -> Self {
        ChaoticSystem::HindmarshRose {
            current: HR_LITERAL_CURRENT,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ChaoticSystem::Lorenz96 { nodes, .. } => *nodes,
            ChaoticSystem::Lorenz { .. } | ChaoticSystem::HindmarshRose { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ChaoticSystem::Lorenz96 { nodes, .. } = self {
            if *nodes < 4 {
                return Err(Error::Config(format!(
                    "Lorenz96 needs at least 4 nodes, got {nodes}"
                )));
            }
        }
        Ok(())
    }
}

impl VectorField for ChaoticSystem {
    fn dimension(&self) -> usize {
        ChaoticSystem::dimension(self)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            ChaoticSystem::Lorenz96 { forcing, nodes: m } => {
                for i in 0..m {
                    let next = x[(i + 1) % m];
                    let prev = x[(i + m - 1) % m];
                    let prev2 = x[(i + m - 2) % m];
                    out[i] = (next - prev2) * prev - x[i] + forcing;
                }
            }
            ChaoticSystem::Lorenz { c1, c2, c3 } => {
                out[0] = c1 * (x[1] - x[0]);
                out[1] = x[0] * (c2 - x[2]) - x[1];
                out[2] = x[0] * x[1] - c3 * x[2];
            }
            ChaoticSystem::HindmarshRose { current } => {
                let v = x[0];
                let phi = -v * v * v + 3.0 * v * v;
                let psi = 1.0 - 5.0 * v * v;
                out[0] = x[1] + phi - x[2] + current;
                out[1] = psi - x[1];
                out[2] = 5e-3 * (4.0 * (v + 8.0 / 5.0) - x[2]);
            }
        }
    }
}

/// Time derivative of `system` at `state`.
pub fn system_rhs(system: &ChaoticSystem, state: &[f64]) -> Result<Vec<f64>> {
    system.validate()?;
    let dim = system.dimension();
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: state.len(),
        });
    }
    let mut out = vec![0.0; dim];
    system.eval(state, &mut out);
    Ok(out)
}

/// Uniformly sampled multivariate signal. Row `k` is the sample at
/// `t_start + k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub t_start: f64,
    pub dt: f64,
    pub values: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(t_start: f64, dt: f64, values: DMatrix<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if values.nrows() == 0 {
            return Err(Error::Config("time series needs at least one sample".into()));
        }
        Ok(TimeSeries {
            t_start,
            dt,
            values,
        })
    }

    pub fn scalar(t_start: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(t_start, dt, DMatrix::from_vec(n, 1, values))
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.values.ncols()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    /// Extract one component as a scalar series.
    pub fn component(&self, index: usize) -> Result<TimeSeries> {
        if index >= self.dimension() {
            return Err(Error::Config(format!(
                "component {index} out of range for a {}-dimensional series",
                self.dimension()
            )));
        }
        let col = self.values.column(index).iter().copied().collect();
        TimeSeries::scalar(self.t_start, self.dt, col)
    }

    /// Samples of a scalar series. Column-major storage makes the single
    /// column contiguous.
    pub fn as_scalar(&self) -> Result<&[f64]> {
        if self.dimension() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dimension(),
            });
        }
        Ok(self.values.as_slice())
    }

    /// CSV with columns `t, x_1..x_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dimension()).map(|i| format!("x_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            write!(w, "{}", self.time(k))?;
            for v in self.values.row(k).iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Classical fixed-step RK4 from `t = 0` to `t_end`, one sample per step
/// (the initial state included).
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    initial_state: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<TimeSeries> {
    let dim = field.dimension();
    if initial_state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: initial_state.len(),
        });
    }
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Config(format!(
            "integration needs dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut data = Vec::with_capacity((steps + 1) * dim);
    data.extend_from_slice(initial_state);

    let mut x = initial_state.to_vec();
    let mut stepper = Rk4::new(dim);
    for step in 1..=steps {
        stepper.step(field, &mut x, dt);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                context: "chaotic system".into(),
            });
        }
        data.extend_from_slice(&x);
    }
    TimeSeries::new(0.0, dt, DMatrix::from_row_slice(steps + 1, dim, &data))
}

/// Scratch buffers for one RK4 step of an autonomous field.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step<F: VectorField + ?Sized>(&mut self, field: &F, x: &mut [f64], dt: f64) {
        let h = 0.5 * dt;
        field.eval(x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k1[i];
        }
        field.eval(&self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k2[i];
        }
        field.eval(&self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        field.eval(&self.tmp, &mut self.k4);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// First lag at which the mean-removed, biased autocorrelation of a scalar
/// signal falls to half its lag-zero value, interpolated linearly between
/// the bracketing lags.
pub fn autocorrelation_timescale(signal: &TimeSeries) -> Result<f64> {
    autocorrelation_timescale_of(signal.as_scalar()?, signal.dt)
}

pub fn autocorrelation_timescale_of(values: &[f64], dt: f64) -> Result<f64> {
    autocorrelation_timescale_within(values, dt, values.len().saturating_sub(1))
}

/// As [`autocorrelation_timescale_of`], searching lags `1..=max_lag` only.
pub fn autocorrelation_timescale_within(values: &[f64], dt: f64, max_lag: usize) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(
            "autocorrelation needs at least two samples".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let max_lag = max_lag.min(n - 1);
    let mut prev = 1.0;
    for lag in 1..=max_lag {
        let rho = acov(lag) / c0;
        if rho <= 0.5 {
            let frac = (prev - 0.5) / (prev - rho);
            return Ok(((lag - 1) as f64 + frac) * dt);
        }
        prev = rho;
    }
    Err(Error::TimescaleUndefined { max_lag })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Lorenz96,
    Lorenz,
    #[serde(rename = "hr")]
    HindmarshRose,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lorenz96" | "l96" => Ok(TaskKind::Lorenz96),
            "lorenz" => Ok(TaskKind::Lorenz),
            "hr" | "hindmarsh-rose" | "hindmarshrose" => Ok(TaskKind::HindmarshRose),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Lorenz96 => "lorenz96",
            TaskKind::Lorenz => "lorenz",
            TaskKind::HindmarshRose => "hr",
        })
    }
}

/// A signal-reconstruction task: drive the reservoir with one component of
/// a chaotic system and fit another. Phases are transient `[0, t1)`,
/// training `[t1, t2)` and testing `[t2, t3)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub system: ChaoticSystem,
    pub input_component: usize,
    pub target_component: usize,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// Characteristic autocorrelation timescale of the task signal.
    pub tau_bar: f64,
}

impl TaskDefinition {
    /// Input `x_1`, target `x_4`.
    pub fn lorenz96() -> Self {
        TaskDefinition {
            system: ChaoticSystem::lorenz96(),
            input_component: 0,
            target_component: 3,
            t1: 1000.0,
            t2: 1100.0,
            t3: 1200.0,
            tau_bar: 0.19,
        }
    }

    /// Input `x`, target `y`.
    pub fn lorenz() -> Self {
        TaskDefinition {
            system: ChaoticSystem::lorenz(),
            input_component: 0,
            target_component: 1,
            t1: 600.0,
            t2: 610.0,
            t3: 615.0,
            tau_bar: 0.3,
        }
    }

    /// Input `x`, target `y`.
    pub fn hindmarsh_rose() -> Self {
        TaskDefinition {
            system: ChaoticSystem::hindmarsh_rose(),
            input_component: 0,
            target_component: 1,
            t1: 1000.0,
            t2: 1010.0,
            t3: 1015.0,
            tau_bar: 0.46,
        }
    }

    pub fn for_kind(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Lorenz96 => Self::lorenz96(),
            TaskKind::Lorenz => Self::lorenz(),
            TaskKind::HindmarshRose => Self::hindmarsh_rose(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let dim = self.system.dimension();
        if self.input_component >= dim || self.target_component >= dim {
            return Err(Error::Config(format!(
                "task components ({}, {}) out of range for dimension {dim}",
                self.input_component, self.target_component
            )));
        }
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t3) {
            return Err(Error::Config(format!(
                "phase boundaries must satisfy 0 < t1 < t2 < t3, got {}, {}, {}",
                self.t1, self.t2, self.t3
            )));
        }
        if !(self.tau_bar > 0.0) {
            return Err(Error::Config(format!(
                "tau_bar must be positive, got {}",
                self.tau_bar
            )));
        }
        Ok(())
    }

    /// Integrates the task system from a seeded uniform `[-1, 1]` initial
    /// condition up to `t_end` and splits out the input and target signals.
    pub fn simulate(&self, dt: f64, t_end: f64, ic_seed: u64) -> Result<TaskSignals> {
        self.validate()?;
        let mut rng = seed::rng(ic_seed);
        let initial: Vec<f64> = (0..self.system.dimension())
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect();
        let trajectory = integrate(&self.system, &initial, dt, t_end)?;
        Ok(TaskSignals {
            input: trajectory.component(self.input_component)?,
            target: trajectory.component(self.target_component)?,
        })
    }
}

/// Input `s(t)` and target `g(t)` sampled from `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSignals {
    pub input: TimeSeries,
    pub target: TimeSeries,
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;

    impl VectorField for Decay {
        fn dimension(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = -x[0];
        }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lorenz96_uniform_state_is_fixed_point() {
        for m in 4..12 {
            let sys = ChaoticSystem::Lorenz96 {
                forcing: 8.0,
                nodes: m,
            };
            let d = system_rhs(&sys, &vec![8.0; m]).unwrap();
            assert!(d.iter().all(|&v| v == 0.0), "M={m}: {d:?}");
        }
    }

    #[test]
    fn lorenz_rhs_by_hand() {
        let d = system_rhs(&ChaoticSystem::lorenz(), &[1.0, 1.0, 1.0]).unwrap();
        assert!(close(&d, &[0.0, 26.0, -5.0 / 3.0], 1e-14), "{d:?}");
    }

    #[test]
    fn hindmarsh_rose_rhs_at_origin() {
        let d = system_rhs(&ChaoticSystem::hindmarsh_rose_literal(), &[0.0, 0.0, 0.0]).unwrap();
        assert!(close(&d, &[1.0, 1.0, 5e-3 * (32.0 / 5.0)], 1e-15), "{d:?}");
    }

    #[test]
    fn lorenz96_cyclic_indexing() {
        // x = (1,2,3,4): ẋ_1 = (x_2 − x_{-1}) x_0 − x_1 + F = (2 − 3)·4 − 1 + 8 = 3,
        // ẋ_4 = (x_5 − x_2) x_3 − x_4 + F = (1 − 2)·3 − 4 + 8 = 1
        let sys = ChaoticSystem::lorenz96();
        let d = system_rhs(&sys, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d, vec![3.0, 5.0, 11.0, 1.0]);
    }

    #[test]
    fn rhs_rejects_wrong_dimension() {
        let err = system_rhs(&ChaoticSystem::lorenz(), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
        let small = ChaoticSystem::Lorenz96 {
            forcing: 8.0,
            nodes: 3,
        };
        assert!(matches!(system_rhs(&small, &[1.0; 3]), Err(Error::Config(_))));
    }

    #[test]
    fn fixed_point_trajectory_is_constant() {
        let ts = integrate(&ChaoticSystem::lorenz96(), &[8.0; 4], 0.013, 2.0).unwrap();
        assert!(ts.values.iter().all(|&v| v == 8.0));
        assert_eq!(ts.len(), (2.0f64 / 0.013).round() as usize + 1);
    }

    #[test]
    fn rk4_matches_exponential() {
        let ts = integrate(&Decay, &[1.0], 0.01, 1.0).unwrap();
        assert_eq!(ts.len(), 101);
        let last = ts.values[(100, 0)];
        assert!((last - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let ts = integrate(&Decay, &[1.0], dt, 1.0).unwrap();
            (ts.values[(ts.len() - 1, 0)] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sample_times_do_not_drift() {
        let ts = integrate(&Decay, &[1.0], 0.01, 1200.0).unwrap();
        assert_eq!(ts.time(120_000), 120_000.0 * 0.01);
    }

    #[test]
    fn divergence_reports_step() {
        struct Blowup;
        impl VectorField for Blowup {
            fn dimension(&self) -> usize {
                1
            }
            fn eval(&self, x: &[f64], out: &mut [f64]) {
                out[0] = x[0] * x[0];
            }
        }
        let err = integrate(&Blowup, &[1.0], 0.1, 100.0).unwrap_err();
        assert!(matches!(err, Error::Diverged { step, .. } if step > 5));
    }

    #[test]
    fn cosine_autocorrelation_timescale() {
        let omega = 2.0;
        let dt = 0.001;
        let values: Vec<f64> = (0..200_000).map(|k| (omega * k as f64 * dt).cos()).collect();
        let tau = autocorrelation_timescale_of(&values, dt).unwrap();
        let expected = std::f64::consts::PI / (3.0 * omega);
        assert!((tau - expected).abs() / expected < 0.02, "{tau} vs {expected}");
    }

    #[test]
    fn timescale_errors() {
        assert!(matches!(
            autocorrelation_timescale_of(&[1.0; 10], 0.1),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(
            autocorrelation_timescale_of(&[1.0], 0.1),
            Err(Error::Config(_))
        ));
        let slow: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.01).cos()).collect();
        // half-decay sits near lag 105
        assert!(autocorrelation_timescale_within(&slow, 0.01, 200).is_ok());
        assert!(matches!(
            autocorrelation_timescale_within(&slow, 0.01, 50),
            Err(Error::TimescaleUndefined { max_lag: 50 })
        ));
    }

    #[test]
    fn task_phases_validated() {
        let mut task = TaskDefinition::lorenz();
        task.t2 = task.t1;
        assert!(task.validate().is_err());
        assert!(TaskDefinition::lorenz96().validate().is_ok());
        assert_eq!("hr".parse::<TaskKind>().unwrap(), TaskKind::HindmarshRose);
        assert!("duffing".parse::<TaskKind>().is_err());
    }

    #[test]
    fn csv_export_layout() {
        let ts = integrate(&ChaoticSystem::lorenz(), &[1.0, 1.0, 1.0], 0.01, 0.02).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,x_3");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,1,1"));
    }
}
