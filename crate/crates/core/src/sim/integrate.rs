use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::ou::{NoiseSource, OuNoise, OuSpec};
use super::{ModelKind, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{
    assemble_linearized, build_jacobian, solve_fixed_point, Grid, LinearizedSystem, OperatingPoint,
};
use crate::kron::ReducedSystem;

/// One theta-method step of `X' = A X + B eta` with `eta` held constant:
/// `(I - theta dt A) X+ = (I + (1 - theta) dt A) X + dt B eta`.
#[derive(Debug, Clone)]
pub struct LinearStepper {
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
    dt: f64,
}

impl LinearStepper {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64, theta: f64) -> Result<Self> {
        let n = a.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let lu = (&eye - a * (theta * dt)).lu();
        let phi = lu
            .solve(&(&eye + a * ((1.0 - theta) * dt)))
            .ok_or(Error::SingularStep(dt))?;
        let psi = lu.solve(&(b * dt)).ok_or(Error::SingularStep(dt))?;
        if !phi.iter().chain(psi.iter()).all(|v| v.is_finite()) {
            return Err(Error::SingularStep(dt));
        }
        Ok(LinearStepper { phi, psi, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, state: &DVector<f64>, eta: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.phi, state, 0.0);
        out.gemv(1.0, &self.psi, eta, 1.0);
    }
}

/// Second-order system `M q'' + D q' = J q + N eta` in first-order form
/// `X = (q, q')`.
fn second_order_drift(
    j: &DMatrix<f64>,
    m: &DVector<f64>,
    d: &DVector<f64>,
    noise_in: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = j.nrows();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, noise_in.ncols());
    a.view_mut((0, n), (n, n)).fill_with_identity();
    for i in 0..n {
        for k in 0..n {
            a[(n + i, k)] = j[(i, k)] / m[i];
        }
        a[(n + i, n + i)] = -d[i] / m[i];
        for k in 0..noise_in.ncols() {
            b[(n + i, k)] = noise_in[(i, k)] / m[i];
        }
    }
    (a, b)
}

/// Starting deviation `(q, q')` from the fixed point, in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub positions: DVector<f64>,
    pub velocities: DVector<f64>,
}

fn centered_excursion(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let (sum, n) = x.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    let mean = sum / n.max(1) as f64;
    x.map(|v| (v - mean).abs()).fold(0.0, f64::max)
}

struct Recorder {
    times: Vec<f64>,
    x: Vec<f64>,
    xdot: Vec<f64>,
    y: Option<Vec<f64>>,
    n_slow: usize,
    n_fast: usize,
}

impl Recorder {
    fn new(n_slow: usize, n_fast: Option<usize>, capacity: usize) -> Self {
        Recorder {
            times: Vec::with_capacity(capacity),
            x: Vec::with_capacity(capacity * n_slow),
            xdot: Vec::with_capacity(capacity * n_slow),
            y: n_fast.map(|nf| Vec::with_capacity(capacity * nf)),
            n_slow,
            n_fast: n_fast.unwrap_or(0),
        }
    }

    fn push(&mut self, t: f64, positions: &[f64], velocities: &[f64]) {
        self.times.push(t);
        self.x.extend_from_slice(&positions[..self.n_slow]);
        self.xdot.extend_from_slice(&velocities[..self.n_slow]);
        if let Some(y) = &mut self.y {
            y.extend_from_slice(&positions[self.n_slow..self.n_slow + self.n_fast]);
        }
    }

    fn finish(self, bus_ids: Vec<u32>) -> Trajectory {
        let rows = self.times.len();
        Trajectory {
            x: DMatrix::from_row_slice(rows, self.n_slow, &self.x),
            xdot: DMatrix::from_row_slice(rows, self.n_slow, &self.xdot),
            y: self
                .y
                .map(|y| DMatrix::from_row_slice(rows, self.n_fast, &y)),
            times: self.times,
            bus_ids,
        }
    }
}

fn run_linear(
    stepper: &LinearStepper,
    init: DVector<f64>,
    noise: &mut dyn NoiseSource,
    cfg: &SimConfig,
    n_slow: usize,
    record_fast: Option<usize>,
    bus_ids: Vec<u32>,
) -> Result<Trajectory> {
    let n_steps = cfg.n_steps();
    let dt = stepper.dt();
    let n_pos = init.len() / 2;
    let mut state = init;
    let mut next = DVector::zeros(state.len());
    let mut eta = DVector::zeros(noise.dim());
    let mut rec = Recorder::new(n_slow, record_fast, n_steps / cfg.record_every + 1);
    rec.push(0.0, &state.as_slice()[..n_pos], &state.as_slice()[n_pos..]);
    for k in 1..=n_steps {
        noise.next_into(&mut eta);
        stepper.step(&state, &eta, &mut next);
        std::mem::swap(&mut state, &mut next);
        let t = k as f64 * dt;
        if centered_excursion(state.iter().take(n_slow).copied()) > PI
            || !state[0].is_finite()
        {
            return Err(Error::Diverged(t));
        }
        if k % cfg.record_every == 0 {
            rec.push(t, &state.as_slice()[..n_pos], &state.as_slice()[n_pos..]);
        }
    }
    Ok(rec.finish(bus_ids))
}

fn initial_vector(init: Option<&InitialState>, n: usize) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(2 * n);
    if let Some(init) = init {
        if init.positions.len() != n || init.velocities.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial state needs {n} positions and velocities"
            )));
        }
        v.rows_mut(0, n).copy_from(&init.positions);
        v.rows_mut(n, n).copy_from(&init.velocities);
    }
    Ok(v)
}

fn check_noise(noise: &dyn NoiseSource, expected: usize) -> Result<()> {
    if noise.dim() != expected {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} channels, model needs {expected}",
            noise.dim()
        )));
    }
    Ok(())
}

fn full_linear_stepper(sys: &LinearizedSystem, cfg: &SimConfig) -> Result<LinearStepper> {
    let (m, d) = sys.scaled_inertia_damping();
    let n = m.len();
    let (a, b) = second_order_drift(&sys.full_jacobian(), &m, &d, &DMatrix::identity(n, n));
    LinearStepper::new(&a, &b, cfg.dt(), cfg.theta)
}

/// Linearized two-timescale model, all buses dynamic. Noise channels are
/// slow buses then fast buses. `sys.epsilon` is used; `cfg.epsilon` is not.
pub fn integrate_full_linear(
    sys: &LinearizedSystem,
    cfg: &SimConfig,
    noise: &mut dyn NoiseSource,
    init: Option<&InitialState>,
) -> Result<Trajectory> {
    let n = sys.n_slow() + sys.n_fast();
    check_noise(noise, n)?;
    let stepper = full_linear_stepper(sys, cfg)?;
    let init = initial_vector(init, n)?;
    run_linear(&stepper, init, noise, cfg, sys.n_slow(), Some(sys.n_fast()), sys.slow_ids.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// `xi = eta_S + K eta_F`
    Xi,
    /// `eta_S` only
    Naive,
}

fn reduced_stepper(red: &ReducedSystem, cfg: &SimConfig, mode: NoiseMode) -> Result<LinearStepper> {
    let (ns, nf) = (red.n_slow(), red.n_fast());
    let mut noise_in = DMatrix::zeros(ns, ns + nf);
    noise_in.view_mut((0, 0), (ns, ns)).fill_with_identity();
    if mode == NoiseMode::Xi {
        noise_in.view_mut((0, ns), (ns, nf)).copy_from(&red.noise_map);
    }
    let (a, b) = second_order_drift(&red.j_red, &red.m_slow, &red.d_slow, &noise_in);
    LinearStepper::new(&a, &b, cfg.dt(), cfg.theta)
}

/// Reduced slow-bus model. The noise source always carries all `N_S + N_F`
/// channels so that both modes see the same `eta_S` for a given seed.
pub fn integrate_reduced(
    red: &ReducedSystem,
    cfg: &SimConfig,
    mode: NoiseMode,
    noise: &mut dyn NoiseSource,
    init: Option<&InitialState>,
) -> Result<Trajectory> {
    check_noise(noise, red.n_slow() + red.n_fast())?;
    let stepper = reduced_stepper(red, cfg, mode)?;
    let init = initial_vector(init, red.n_slow())?;
    run_linear(&stepper, init, noise, cfg, red.n_slow(), None, red.slow_ids.clone())
}

/// Nonlinear swing dynamics in slow-then-fast order.
struct NonlinearModel {
    /// Per line: (i, j, b) in model order.
    couplings: Vec<(usize, usize, f64)>,
    injection: DVector<f64>,
    m: DVector<f64>,
    d: DVector<f64>,
    theta_star: DVector<f64>,
    n_slow: usize,
}

impl NonlinearModel {
    fn new(grid: &Grid, op: &OperatingPoint, epsilon: f64) -> Self {
        let order: Vec<usize> = grid
            .slow_positions()
            .into_iter()
            .chain(grid.fast_positions())
            .collect();
        let mut model_index = vec![0; grid.len()];
        for (k, &pos) in order.iter().enumerate() {
            model_index[pos] = k;
        }
        let n_slow = grid.slow_positions().len();
        let pick = |f: &dyn Fn(usize) -> f64| {
            DVector::from_iterator(order.len(), order.iter().map(|&p| f(p)))
        };
        let scale = |k: usize| if k < n_slow { 1.0 } else { epsilon };
        let buses = grid.buses();
        NonlinearModel {
            couplings: grid
                .couplings()
                .map(|(i, j, b)| (model_index[i], model_index[j], b))
                .collect(),
            injection: pick(&|p| buses[p].injection),
            m: DVector::from_iterator(
                order.len(),
                order.iter().enumerate().map(|(k, &p)| buses[p].inertia * scale(k)),
            ),
            d: DVector::from_iterator(
                order.len(),
                order.iter().enumerate().map(|(k, &p)| buses[p].damping * scale(k)),
            ),
            theta_star: pick(&|p| op.theta_star[p]),
            n_slow,
        }
    }

    fn force(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut f = self.injection.clone();
        for &(i, j, b) in &self.couplings {
            let flow = b * (theta[i] - theta[j]).sin();
            f[i] -= flow;
            f[j] += flow;
        }
        f
    }

    fn force_jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = theta.len();
        let mut jac = DMatrix::zeros(n, n);
        for &(i, j, b) in &self.couplings {
            let c = b * (theta[i] - theta[j]).cos();
            jac[(i, j)] += c;
            jac[(j, i)] += c;
            jac[(i, i)] -= c;
            jac[(j, j)] -= c;
        }
        jac
    }
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 30;

/// Full nonlinear swing equations, drift-implicit with one Newton solve per
/// step. Noise channels are slow buses then fast buses.
pub fn integrate_full_nonlinear(
    grid: &Grid,
    op: &OperatingPoint,
    cfg: &SimConfig,
    noise: &mut dyn NoiseSource,
    init: Option<&InitialState>,
) -> Result<Trajectory> {
    let model = NonlinearModel::new(grid, op, cfg.epsilon);
    let n = grid.len();
    check_noise(noise, n)?;
    let init = initial_vector(init, n)?;
    let th = cfg.theta;
    let dt = cfg.dt();
    let n_steps = cfg.n_steps();
    let slow_ids = grid.slow_ids();

    let mut theta = &model.theta_star + init.rows(0, n);
    let mut omega = init.rows(n, n).into_owned();
    let mut force = model.force(&theta);
    let mut eta = DVector::zeros(n);
    let mut rec = Recorder::new(model.n_slow, Some(n - model.n_slow), n_steps / cfg.record_every + 1);
    let record = |rec: &mut Recorder, t: f64, theta: &DVector<f64>, omega: &DVector<f64>| {
        let dev = theta - &model.theta_star;
        rec.push(t, dev.as_slice(), omega.as_slice());
    };
    record(&mut rec, 0.0, &theta, &omega);

    let lhs_diag = model.m.zip_map(&model.d, |m, d| (m + dt * th * d) / (dt * th));
    for k in 1..=n_steps {
        let t = k as f64 * dt;
        noise.next_into(&mut eta);
        // explicit part of the momentum balance
        let explicit = model.m.component_mul(&omega)
            - (model.d.component_mul(&omega) * (1.0 - th) - &force * (1.0 - th) - &eta) * dt;
        let omega_of = |next: &DVector<f64>| (next - &theta) / (dt * th) - &omega * ((1.0 - th) / th);
        let residual_of = |next: &DVector<f64>, f_next: &DVector<f64>| {
            let w = omega_of(next);
            (&model.m + &model.d * (dt * th)).component_mul(&w) - f_next * (dt * th) - &explicit
        };

        let mut next = &theta + &omega * dt;
        let mut f_next = model.force(&next);
        let mut r = residual_of(&next, &f_next);
        let scale = explicit.amax().max(model.m.amax() * 1e-3).max(1e-12);
        let mut iter = 0;
        while r.amax() > NEWTON_TOL * scale {
            if iter == NEWTON_MAX_ITER {
                return Err(Error::StepNewton {
                    t,
                    residual: r.amax(),
                });
            }
            iter += 1;
            let mut jac = -model.force_jacobian(&next) * (dt * th);
            for i in 0..n {
                jac[(i, i)] += lhs_diag[i];
            }
            let delta = jac.lu().solve(&r).ok_or(Error::StepNewton {
                t,
                residual: r.amax(),
            })?;
            next -= delta;
            f_next = model.force(&next);
            r = residual_of(&next, &f_next);
        }
        omega = omega_of(&next);
        theta = next;
        force = f_next;

        let dev_slow = (0..model.n_slow).map(|i| theta[i] - model.theta_star[i]);
        if centered_excursion(dev_slow) > PI || !theta[0].is_finite() {
            return Err(Error::Diverged(t));
        }
        if k % cfg.record_every == 0 {
            record(&mut rec, t, &theta, &omega);
        }
    }
    Ok(rec.finish(slow_ids))
}

/// A grid with its fixed point and Jacobian, ready for any model.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub op: OperatingPoint,
    pub jacobian: DMatrix<f64>,
}

impl Scenario {
    pub fn new(grid: Grid) -> Result<Self> {
        let op = solve_fixed_point(&grid, 1e-10, 100)?;
        let jacobian = build_jacobian(&grid, &op);
        Ok(Scenario { grid, op, jacobian })
    }

    pub fn linearized(&self, epsilon: f64) -> Result<LinearizedSystem> {
        assemble_linearized(&self.grid, &self.jacobian, epsilon)
    }

    pub fn reduced(&self) -> Result<ReducedSystem> {
        ReducedSystem::from_linearized(&self.linearized(1.0)?)
    }

    /// Noise channels in model order (slow then fast).
    pub fn noise_spec(&self, seed: u64) -> OuSpec {
        let buses = self.grid.buses();
        let order: Vec<usize> = self
            .grid
            .slow_positions()
            .into_iter()
            .chain(self.grid.fast_positions())
            .collect();
        OuSpec {
            sigma: order.iter().map(|&k| buses[k].noise_sigma).collect(),
            tau: order.iter().map(|&k| buses[k].noise_tau).collect(),
            seed,
        }
    }
}

enum Prepared {
    Linear {
        stepper: LinearStepper,
        n_slow: usize,
        record_fast: Option<usize>,
        bus_ids: Vec<u32>,
    },
    Nonlinear,
}

/// A model prepared once for repeated seeded runs.
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    cfg: SimConfig,
    prepared: Prepared,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let prepared = match cfg.model {
            ModelKind::FullLinear => {
                let sys = scenario.linearized(cfg.epsilon)?;
                Prepared::Linear {
                    stepper: full_linear_stepper(&sys, cfg)?,
                    n_slow: sys.n_slow(),
                    record_fast: Some(sys.n_fast()),
                    bus_ids: sys.slow_ids.clone(),
                }
            }
            ModelKind::ReducedXi | ModelKind::ReducedNaive => {
                let red = scenario.reduced()?;
                let mode = if cfg.model == ModelKind::ReducedXi {
                    NoiseMode::Xi
                } else {
                    NoiseMode::Naive
                };
                Prepared::Linear {
                    stepper: reduced_stepper(&red, cfg, mode)?,
                    n_slow: red.n_slow(),
                    record_fast: None,
                    bus_ids: red.slow_ids.clone(),
                }
            }
            ModelKind::FullNonlinear => Prepared::Nonlinear,
        };
        Ok(Simulator {
            scenario,
            cfg: cfg.clone(),
            prepared,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn simulate(&self, seed: u64) -> Result<Trajectory> {
        let mut noise = OuNoise::new(&self.scenario.noise_spec(seed), self.cfg.dt())?;
        match &self.prepared {
            Prepared::Linear {
                stepper,
                n_slow,
                record_fast,
                bus_ids,
            } => {
                let dim = if record_fast.is_some() {
                    self.scenario.grid.len()
                } else {
                    *n_slow
                };
                run_linear(
                    stepper,
                    DVector::zeros(2 * dim),
                    &mut noise,
                    &self.cfg,
                    *n_slow,
                    *record_fast,
                    bus_ids.clone(),
                )
            }
            Prepared::Nonlinear => integrate_full_nonlinear(
                &self.scenario.grid,
                &self.scenario.op,
                &self.cfg,
                &mut noise,
                None,
            ),
        }
    }
}
