//! Stochastic simulation of the full and reduced models.
//!
//! Noise enters as piecewise-constant samples of exact OU processes, one
//! sample per step, and the drift is stepped with a theta-method
//! (trapezoidal by default).

mod ensemble;
mod integrate;
mod ou;

pub use ensemble::{coi_frequency_variance_estimate, ensemble_run, EnsembleStats, TrajectoryModel};
pub use integrate::{
    integrate_full_linear, integrate_full_nonlinear, integrate_reduced, InitialState, LinearStepper,
    NoiseMode,
    Scenario, Simulator,
};
pub use ou::{ou_sample_path, DeterministicForcing, NoiseSource, OuNoise, OuSpec, PathNoise};

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LinearizedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    FullNonlinear,
    FullLinear,
    ReducedXi,
    ReducedNaive,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FullNonlinear => "full-nonlinear",
            ModelKind::FullLinear => "full-linear",
            ModelKind::ReducedXi => "reduced-xi",
            ModelKind::ReducedNaive => "reduced-naive",
        }
    }

    pub fn is_full(self) -> bool {
        matches!(self, ModelKind::FullNonlinear | ModelKind::FullLinear)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelKind,
    pub dt_max: f64,
    pub t_end: f64,
    pub burn_in: f64,
    pub ensemble_size: usize,
    pub base_seed: u64,
    /// Timescale ratio of the fast buses; full models only.
    pub epsilon: f64,
    /// Drift implicitness: 0.5 trapezoidal, 1.0 backward Euler.
    pub theta: f64,
    /// Keep every `record_every`-th step in the trajectory.
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(model: ModelKind, dt_max: f64, t_end: f64, burn_in: f64) -> Self {
        SimConfig {
            model,
            dt_max,
            t_end,
            burn_in,
            ensemble_size: 1,
            base_seed: 0,
            epsilon: 1.0,
            theta: 0.5,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return fail(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return fail(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_end) {
            return fail(format!("burn_in {} must lie in [0, t_end)", self.burn_in));
        }
        if self.ensemble_size == 0 {
            return fail("ensemble_size must be at least 1".into());
        }
        if self.theta != 0.5 && self.theta != 1.0 {
            return fail(format!("theta must be 0.5 or 1.0, got {}", self.theta));
        }
        if self.record_every == 0 {
            return fail("record_every must be at least 1".into());
        }
        if self.model.is_full() && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return fail(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt_max - 1e-9).ceil().max(1.0) as usize
    }

    /// Uniform step: the largest `t_end / n` not exceeding `dt_max`.
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps() as f64
    }

    /// `min(tau_min / 10, min_i eps_i m_i / d_i)` with `eps_i = epsilon` on
    /// fast buses.
    pub fn default_dt_max(sys: &LinearizedSystem, epsilon: f64) -> f64 {
        let tau_min = sys.tau().iter().copied().fold(f64::INFINITY, f64::min);
        let slow = sys.m_slow.iter().zip(sys.d_slow.iter()).map(|(m, d)| m / d);
        let fast = sys.m_fast.iter().zip(sys.d_fast.iter()).map(|(m, d)| epsilon * m / d);
        let guard = slow.chain(fast).fold(f64::INFINITY, f64::min);
        (tau_min / 10.0).min(guard)
    }

    /// `10 max(tau, m / d)` over the slow buses.
    pub fn default_burn_in(sys: &LinearizedSystem) -> f64 {
        let tau = sys.tau().iter().copied().fold(0.0, f64::max);
        let relax = sys
            .m_slow
            .iter()
            .zip(sys.d_slow.iter())
            .map(|(m, d)| m / d)
            .fold(0.0, f64::max);
        10.0 * tau.max(relax)
    }
}

/// Sampled slow-bus deviations `x` and frequencies `x'`; rows are time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bus_ids: Vec<u32>,
    pub x: DMatrix<f64>,
    pub xdot: DMatrix<f64>,
    /// Fast-bus deviations, full models only.
    pub y: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with `t`, then `x_<id>` and `xdot_<id>` per slow bus.
    pub fn write_csv<W: Write>(&self, out: W, decimate: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for id in &self.bus_ids {
            header.push(format!("x_{id}"));
            header.push(format!("xdot_{id}"));
        }
        w.write_record(&header)?;
        for k in (0..self.len()).step_by(decimate.max(1)) {
            let mut row = vec![self.times[k].to_string()];
            for i in 0..self.bus_ids.len() {
                row.push(self.x[(k, i)].to_string());
                row.push(self.xdot[(k, i)].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
