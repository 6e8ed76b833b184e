//! Parse a grid, find its fixed point and Kron-reduce it.
//!
//! cargo run --example reduce_grid [path/to/grid.json]

use kron_noise::grid::parse_grid_json;
use kron_noise::sim::Scenario;

const PATH3: &str = r#"{
  "buses": [
    {"id": 1, "class": "slow", "m": 0.2, "d": 0.05, "p": 0.3, "sigma": 0.0, "tau": 0.1},
    {"id": 2, "class": "fast", "m": 0.002, "d": 0.0005, "p": -0.1, "sigma": 1.0, "tau": 0.1},
    {"id": 3, "class": "slow", "m": 0.2, "d": 0.05, "p": -0.2, "sigma": 0.0, "tau": 0.1}
  ],
  "lines": [{"from": 1, "to": 2, "B": 1.0}, {"from": 2, "to": 3, "B": 1.0}]
}"#;

fn main() -> kron_noise::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => PATH3.to_string(),
    };
    let scenario = Scenario::new(parse_grid_json(&text)?)?;
    println!("theta* = {:?}", scenario.op.theta_star);
    let red = scenario.reduced()?;
    println!("J_red = {}", red.j_red);
    println!("K = {}", red.noise_map);
    println!("Sigma_xi = {}", red.sigma_xi);
    Ok(())
}
