//! Random symmetric tanh reservoir, `ṙ = γ[−r + tanh(εA r + s(t) w)]`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::seed;

/// Margin by which the diagonal undercuts the largest off-diagonal row sum.
const BETA_MARGIN: f64 = 0.1;

/// Symmetric adjacency with i.i.d. `U[0, 1)` off-diagonal entries and a
/// constant negative diagonal `beta`. `beta` is one margin below minus the
/// largest off-diagonal row sum, which by Gershgorin puts every eigenvalue
/// at or below `-0.1`.
pub fn build_adjacency(n: usize, seed: u64) -> Result<(DMatrix<f64>, f64)> {
    if n < 2 {
        return Err(Error::Config(format!(
            "reservoir needs at least 2 nodes, got {n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.gen();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let max_row_sum = (0..n)
        .map(|i| a.row(i).iter().sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let beta = -max_row_sum - BETA_MARGIN;
    for i in 0..n {
        a[(i, i)] = beta;
    }

    let lambda_max = largest_eigenvalue(&a);
    if !(lambda_max < 0.0) {
        return Err(Error::Construction(lambda_max));
    }
    Ok((a, beta))
}

pub fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fixed parameters of one reservoir.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirConfig {
    pub n: usize,
    pub adjacency: DMatrix<f64>,
    pub beta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub input_weights: DVector<f64>,
    pub dt: f64,
    pub seed: u64,
}

impl ReservoirConfig {
    /// Builds the adjacency from `seed`; input weights are all ones.
    pub fn new(n: usize, epsilon: f64, gamma: f64, dt: f64, seed: u64) -> Result<Self> {
        let (adjacency, beta) = build_adjacency(n, seed)?;
        let config = ReservoirConfig {
            n,
            adjacency,
            beta,
            epsilon,
            gamma,
            input_weights: DVector::from_element(n, 1.0),
            dt,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Same network, different rates.
    pub fn with_rates(&self, epsilon: f64, gamma: f64) -> Result<Self> {
        let config = ReservoirConfig {
            epsilon,
            gamma,
            ..self.clone()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.adjacency.shape() != (self.n, self.n) || self.input_weights.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.adjacency.nrows(),
            });
        }
        Ok(())
    }
}

/// Right-hand side of the reservoir ODE with `εA` precomputed.
struct Field<'a> {
    coupling: DMatrix<f64>,
    weights: &'a DVector<f64>,
    gamma: f64,
    pre: DVector<f64>,
}

impl<'a> Field<'a> {
    fn new(config: &'a ReservoirConfig) -> Self {
        Field {
            coupling: &config.adjacency * config.epsilon,
            weights: &config.input_weights,
            gamma: config.gamma,
            pre: DVector::zeros(config.n),
        }
    }

    fn eval(&mut self, r: &DVector<f64>, s: f64, out: &mut DVector<f64>) {
        self.pre.gemv(1.0, &self.coupling, r, 0.0);
        self.pre.axpy(s, self.weights, 1.0);
        for ((o, &p), &ri) in out.iter_mut().zip(self.pre.iter()).zip(r.iter()) {
            *o = self.gamma * (p.tanh() - ri);
        }
    }
}

/// Node states and exact derivatives recorded on a contiguous range of
/// integration steps. Row `j` belongs to global step `first_step + j`, that
/// is time `(first_step + j)·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirTrajectory {
    pub first_step: usize,
    /// Seed of the network that produced the trajectory.
    pub seed: u64,
    pub dt: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// samples × N, `r_i(t)`.
    pub states: DMatrix<f64>,
    /// samples × N, `ṙ_i(t)`.
    pub derivatives: DMatrix<f64>,
}

impl ReservoirTrajectory {
    pub fn samples(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.states.ncols()
    }

    pub fn last_step(&self) -> usize {
        self.first_step + self.samples() - 1
    }

    pub fn time(&self, row: usize) -> f64 {
        (self.first_step + row) as f64 * self.dt
    }

    /// CSV with columns `t, r_1..r_N`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.n_nodes()).map(|i| format!("r_{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.samples() {
            write!(w, "{}", self.time(j))?;
            for v in self.states.row(j).iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates the reservoir from `r(0) = 0` under `input` with RK4 and
/// records every step in `[record_start, record_end]`.
///
/// The input must be sampled from `t = 0` on the reservoir's own grid.
/// Half-step RK4 stages see the mean of the two bracketing input samples.
pub fn drive(
    config: &ReservoirConfig,
    input: &TimeSeries,
    record_start: f64,
    record_end: f64,
) -> Result<ReservoirTrajectory> {
    config.validate()?;
    let s = input.as_scalar()?;
    let dt = config.dt;
    if input.t_start.abs() > 1e-12 || (input.dt - dt).abs() > 1e-12 * dt {
        return Err(Error::Config(format!(
            "input must start at t=0 with dt={dt}, got t_start={} dt={}",
            input.t_start, input.dt
        )));
    }
    if !(record_start >= 0.0) || !(record_end >= record_start) {
        return Err(Error::Config(format!(
            "invalid recording window [{record_start}, {record_end}]"
        )));
    }
    let first = (record_start / dt).round() as usize;
    let last = (record_end / dt).round() as usize;
    if s.len() <= last {
        return Err(Error::Config(format!(
            "input covers {} steps, recording needs {}",
            s.len(),
            last + 1
        )));
    }

    let n = config.n;
    let samples = last - first + 1;
    let mut states = Vec::with_capacity(samples * n);
    let mut derivs = Vec::with_capacity(samples * n);

    let mut field = Field::new(config);
    let mut r = DVector::<f64>::zeros(n);
    let mut k1 = DVector::<f64>::zeros(n);
    let mut k2 = DVector::<f64>::zeros(n);
    let mut k3 = DVector::<f64>::zeros(n);
    let mut k4 = DVector::<f64>::zeros(n);
    let mut tmp = DVector::<f64>::zeros(n);
    let h = 0.5 * dt;

    for step in 0..=last {
        field.eval(&r, s[step], &mut k1);
        if step >= first {
            states.extend_from_slice(r.as_slice());
            derivs.extend_from_slice(k1.as_slice());
        }
        if step == last {
            break;
        }
        let s_mid = 0.5 * (s[step] + s[step + 1]);
        tmp.copy_from(&r);
        tmp.axpy(h, &k1, 1.0);
        field.eval(&tmp, s_mid, &mut k2);
        tmp.copy_from(&r);
        tmp.axpy(h, &k2, 1.0);
        field.eval(&tmp, s_mid, &mut k3);
        tmp.copy_from(&r);
        tmp.axpy(dt, &k3, 1.0);
        field.eval(&tmp, s[step + 1], &mut k4);
        for i in 0..n {
            r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: step + 1,
                context: format!("reservoir gamma={} epsilon={}", config.gamma, config.epsilon),
            });
        }
    }

    Ok(ReservoirTrajectory {
        first_step: first,
        seed: config.seed,
        dt,
        gamma: config.gamma,
        epsilon: config.epsilon,
        states: DMatrix::from_row_slice(samples, n, &states),
        derivatives: DMatrix::from_row_slice(samples, n, &derivs),
    })
}
