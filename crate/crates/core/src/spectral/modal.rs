use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::variance::homogeneous_parameters;
use super::ModalBasis;
use crate::error::{Error, Result};
use crate::kron::ReducedSystem;
use crate::sim::{InitialState, NoiseMode, NoiseSource, Trajectory};

/// Exact propagator over `dt` of `z'' + gamma z' = (lambda / m) z + f / m`
/// with `f` constant, in the variables `e = z + f / lambda`, `v = z'`.
#[derive(Debug, Clone, Copy)]
struct ModeStep {
    lambda: f64,
    ee: f64,
    ev: f64,
    ve: f64,
    vv: f64,
}

impl ModeStep {
    fn new(lambda: f64, gamma: f64, m: f64, dt: f64) -> Self {
        let g = Complex64::new(gamma * gamma + 4.0 * lambda / m, 0.0).sqrt();
        let w = g * (dt / 2.0);
        let c = w.cosh();
        let s_fn = if w.norm() < 1e-8 {
            Complex64::new(dt, 0.0)
        } else {
            w.sinh() / (g / 2.0)
        };
        let decay = (-gamma * dt / 2.0).exp();
        ModeStep {
            lambda,
            ee: decay * (c + s_fn * (gamma / 2.0)).re,
            ev: decay * s_fn.re,
            ve: decay * (s_fn * (lambda / m)).re,
            vv: decay * (c - s_fn * (gamma / 2.0)).re,
        }
    }

    fn advance(&self, z: &mut f64, v: &mut f64, f: f64) {
        let z_p = -f / self.lambda;
        let e = *z - z_p;
        let (e1, v1) = (self.ee * e + self.ev * *v, self.ve * e + self.vv * *v);
        *z = e1 + z_p;
        *v = v1;
    }
}

/// Integrates the reduced model mode by mode, exactly for forcing held
/// constant over each step. Requires homogeneous slow `m` and `d`.
///
/// The noise source has `N_S + N_F` channels (slow then fast), combined as
/// in [`crate::sim::integrate_reduced`]. Only modes `2..N_S` are kept, so the
/// result is the COI-projected motion.
pub fn modal_trajectory(
    red: &ReducedSystem,
    basis: &ModalBasis,
    noise: &mut dyn NoiseSource,
    mode: NoiseMode,
    dt: f64,
    n_steps: usize,
    init: Option<&InitialState>,
) -> Result<Trajectory> {
    let params = homogeneous_parameters(red)?;
    let (ns, nf) = (red.n_slow(), red.n_fast());
    if noise.dim() != ns + nf || basis.len() != ns {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} channels and basis {} modes for N_S = {ns}, N_F = {nf}",
            noise.dim(),
            basis.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let steps: Vec<ModeStep> = (1..ns)
        .map(|a| ModeStep::new(basis.lambdas[a], params.gamma, params.m, dt))
        .collect();
    let u = &basis.modes;
    let (mut z, mut v) = (DVector::zeros(ns), DVector::zeros(ns));
    if let Some(init) = init {
        if init.positions.len() != ns || init.velocities.len() != ns {
            return Err(Error::DimensionMismatch("initial state size".into()));
        }
        z = u.tr_mul(&init.positions);
        v = u.tr_mul(&init.velocities);
    }
    z[0] = 0.0;
    v[0] = 0.0;

    let mut x = DMatrix::zeros(n_steps + 1, ns);
    let mut xdot = DMatrix::zeros(n_steps + 1, ns);
    x.set_row(0, &(u * &z).transpose());
    xdot.set_row(0, &(u * &v).transpose());
    let mut eta = DVector::zeros(ns + nf);
    let mut bus_force = DVector::zeros(ns);
    for k in 1..=n_steps {
        noise.next_into(&mut eta);
        bus_force.copy_from(&eta.rows(0, ns));
        if mode == NoiseMode::Xi && nf > 0 {
            bus_force.gemv(1.0, &red.noise_map, &eta.rows(ns, nf), 1.0);
        }
        let modal_force = u.tr_mul(&bus_force);
        for (a, step) in steps.iter().enumerate() {
            step.advance(&mut z[a + 1], &mut v[a + 1], modal_force[a + 1]);
        }
        x.set_row(k, &(u * &z).transpose());
        xdot.set_row(k, &(u * &v).transpose());
    }
    Ok(Trajectory {
        times: (0..=n_steps).map(|k| k as f64 * dt).collect(),
        bus_ids: red.slow_ids.clone(),
        x,
        xdot,
        y: None,
    })
}
