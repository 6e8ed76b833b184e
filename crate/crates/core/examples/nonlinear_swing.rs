//! A perturbed grid relaxing back to its fixed point under the full
//! nonlinear swing equations, next to the linearized model.

use nalgebra::DVector;
use kron_noise::scenarios::homogeneous_test_grid;
use kron_noise::sim::{
    integrate_full_linear, integrate_full_nonlinear, DeterministicForcing, InitialState, ModelKind,
    Scenario, SimConfig,
};

fn main() -> kron_noise::Result<()> {
    let scenario = Scenario::new(homogeneous_test_grid())?;
    let n = scenario.grid.len();
    let mut cfg = SimConfig::new(ModelKind::FullNonlinear, 0.005, 20.0, 0.0);
    cfg.record_every = 400;
    let init = InitialState {
        positions: DVector::from_fn(n, |i, _| if i == 0 { 0.2 } else { 0.0 }),
        velocities: DVector::zeros(n),
    };
    let quiet = || DeterministicForcing::new(n, cfg.dt(), |_, out: &mut DVector<f64>| out.fill(0.0));
    let nonlinear = integrate_full_nonlinear(&scenario.grid, &scenario.op, &cfg, &mut quiet(), Some(&init))?;
    let linear = integrate_full_linear(&scenario.linearized(1.0)?, &cfg, &mut quiet(), Some(&init))?;
    for k in 0..nonlinear.len() {
        println!(
            "t = {:>5.1}  x_1 nonlinear {:+.5}  linear {:+.5}",
            nonlinear.times[k],
            nonlinear.x[(k, 0)],
            linear.x[(k, 0)]
        );
    }
    Ok(())
}
