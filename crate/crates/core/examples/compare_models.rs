//! Naive vs corrected reduction on a ring with a star of loads hanging off
//! bus 1, against the full structure-preserving model.

use kron_noise::scenarios::{star_of_loads_in_ring, EmbeddedStar};
use kron_noise::sim::{ensemble_run, ModelKind, Scenario, SimConfig, Simulator};

fn main() -> kron_noise::Result<()> {
    let scenario = Scenario::new(star_of_loads_in_ring(EmbeddedStar::default())?)?;
    let models = [
        (ModelKind::ReducedNaive, 1.0),
        (ModelKind::ReducedXi, 1.0),
        (ModelKind::FullLinear, 1e-3),
    ];
    for (model, epsilon) in models {
        let mut cfg = SimConfig::new(model, 1e-3, 300.0, 40.0);
        cfg.ensemble_size = 4;
        cfg.epsilon = epsilon;
        cfg.record_every = 10;
        let stats = ensemble_run(&Simulator::new(&scenario, &cfg)?, &cfg)?;
        let v: Vec<String> = stats.var_coi.iter().map(|v| format!("{v:.2e}")).collect();
        println!("{:<14} {}", model.name(), v.join("  "));
    }
    Ok(())
}
