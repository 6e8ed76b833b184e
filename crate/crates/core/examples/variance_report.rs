//! Closed-form COI frequency variances, checked against the Lyapunov oracle.

use kron_noise::scenarios::homogeneous_test_grid;
use kron_noise::sim::Scenario;
use kron_noise::spectral::{coi_variance, eigendecompose_reduced, gamma_from_noise_map, lyapunov_oracle_variance};

fn main() -> kron_noise::Result<()> {
    let red = Scenario::new(homogeneous_test_grid())?.reduced()?;
    let basis = eigendecompose_reduced(&red.j_red)?;
    let report = coi_variance(&red, &basis, &gamma_from_noise_map(&red, &basis))?;
    let oracle = lyapunov_oracle_variance(&red)?;
    println!("bus  total        slow part    fast part    oracle");
    for (k, id) in report.bus_ids.iter().enumerate() {
        println!(
            "{id:>3}  {:.6e}  {:.6e}  {:.6e}  {:.6e}",
            report.var_total[k], report.var_slow[k], report.var_fast[k], oracle[k]
        );
    }
    report.write_csv(std::io::stdout(), true)
}
