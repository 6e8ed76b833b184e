//! Exact OU sampling: stationary variance and autocorrelation.

use kron_noise::sim::{ou_sample_path, OuSpec};

fn main() -> kron_noise::Result<()> {
    let (sigma, tau, dt, n) = (0.01, 0.1, 0.01, 200_000);
    let path = ou_sample_path(&OuSpec { sigma: vec![sigma], tau: vec![tau], seed: 7 }, dt, n)?;
    let x = path.column(0);
    println!("variance / sigma^2 = {:.4}", x.dot(&x) / n as f64 / (sigma * sigma));
    for lag in [5, 10, 20, 30] {
        let c: f64 = (0..n - lag).map(|k| x[k] * x[k + lag]).sum::<f64>() / (n - lag) as f64;
        println!(
            "lag {:.2} s: {:.4} (expected {:.4})",
            lag as f64 * dt,
            c / (sigma * sigma),
            (-(lag as f64) * dt / tau).exp()
        );
    }
    Ok(())
}
