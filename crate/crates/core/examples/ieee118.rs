//! The IEEE 118-bus case: generator buses kept, loads reduced, and the
//! buses whose variance rank changes once the load noise is accounted for.

use kron_noise::cli::competition_ranks;
use kron_noise::grid::MatpowerDefaults;
use kron_noise::scenarios::ieee118;
use kron_noise::sim::Scenario;
use kron_noise::spectral::{coi_variance, eigendecompose_reduced, gamma_from_noise_map};

fn main() -> kron_noise::Result<()> {
    let grid = ieee118(&MatpowerDefaults::default())?.with_uniform_sigma(0.0, 0.01, 42)?;
    let red = Scenario::new(grid)?.reduced()?;
    println!("N_S = {}, N_F = {}", red.n_slow(), red.n_fast());
    let basis = eigendecompose_reduced(&red.j_red)?;
    let report = coi_variance(&red, &basis, &gamma_from_noise_map(&red, &basis))?;
    let naive = competition_ranks(report.var_naive());
    let corrected = competition_ranks(&report.var_total);
    for k in report.naive_order() {
        println!(
            "bus {:>3}: naive rank {:>2} -> {:>2}  ({:.3e} -> {:.3e})",
            report.bus_ids[k], naive[k], corrected[k], report.var_naive()[k], report.var_total[k]
        );
    }
    Ok(())
}
