//! Ensemble of the reduced model with correlated noise, compared with the
//! closed form.

use kron_noise::scenarios::homogeneous_test_grid;
use kron_noise::sim::{ensemble_run, ModelKind, Scenario, SimConfig, Simulator};
use kron_noise::spectral::{coi_variance, eigendecompose_reduced, gamma_from_noise_map};

fn main() -> kron_noise::Result<()> {
    let scenario = Scenario::new(homogeneous_test_grid())?;
    let red = scenario.reduced()?;
    let basis = eigendecompose_reduced(&red.j_red)?;
    let analytic = coi_variance(&red, &basis, &gamma_from_noise_map(&red, &basis))?;

    let mut cfg = SimConfig::new(ModelKind::ReducedXi, 0.01, 500.0, 40.0);
    cfg.ensemble_size = 8;
    cfg.base_seed = 1;
    let stats = ensemble_run(&Simulator::new(&scenario, &cfg)?, &cfg)?;
    for (k, id) in stats.bus_ids.iter().enumerate() {
        println!(
            "bus {id}: simulated {:.4e} +- {:.1e}, analytic {:.4e}",
            stats.var_coi[k], stats.stderr[k], analytic.var_total[k]
        );
    }
    Ok(())
}
