//! Gamma on the two star graphs: zero beyond the uniform mode for a load
//! center, sigma^2 N_F on the uniform mode for a generator center.

use kron_noise::grid::SpeedClass;
use kron_noise::kron::{make_star_grid, StarParams};
use kron_noise::sim::Scenario;
use kron_noise::spectral::{eigendecompose_reduced, gamma_matrix};

fn main() -> kron_noise::Result<()> {
    for center in [SpeedClass::Fast, SpeedClass::Slow] {
        for n in [2, 4, 8, 16] {
            let scenario = Scenario::new(make_star_grid(n, center, StarParams::default())?)?;
            let sys = scenario.linearized(1.0)?;
            let basis = eigendecompose_reduced(&scenario.reduced()?.j_red)?;
            let gamma = gamma_matrix(&sys, &basis, &sys.sigma_fast)?;
            let rest = if gamma.nrows() > 1 {
                gamma.view((1, 1), (n - 1, n - 1)).amax()
            } else {
                0.0
            };
            println!("center {center:?}, n = {n:>2}: Gamma_11 = {:.3e}, max |Gamma_ab| (a,b >= 2) = {rest:.1e}", gamma[(0, 0)]);
        }
    }
    Ok(())
}
