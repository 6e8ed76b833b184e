//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kron_noise::grid::{Bus, Grid, Line, SpeedClass};
use kron_noise::kron::{make_star_grid, ReducedSystem, StarParams};
use kron_noise::scenarios::{
    homogeneous_test_grid, ieee118, random_grid, star_of_generators_with_ring,
    star_of_loads_in_ring, EmbeddedStar, RandomGridSpec,
};
use kron_noise::grid::MatpowerDefaults;
use kron_noise::sim::{
    ensemble_run, integrate_reduced, ou_sample_path, DeterministicForcing, EnsembleStats, ModelKind,
    NoiseMode, OuSpec, Scenario, SimConfig, Simulator,
};
use kron_noise::spectral::{
    coi_variance, eigendecompose_reduced, gamma_from_noise_map, gamma_matrix,
    lyapunov_oracle_variance, modal_trajectory, VarianceReport,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analytic(red: &ReducedSystem) -> VarianceReport {
    let basis = eigendecompose_reduced(&red.j_red).unwrap();
    coi_variance(red, &basis, &gamma_from_noise_map(red, &basis)).unwrap()
}

fn ensemble(scenario: &Scenario, model: ModelKind, dt: f64, t_end: f64, burn_in: f64, n: usize, eps: f64) -> EnsembleStats {
    let mut cfg = SimConfig::new(model, dt, t_end, burn_in);
    cfg.ensemble_size = n;
    cfg.base_seed = 2024;
    cfg.epsilon = eps;
    cfg.record_every = ((0.01 / dt).round() as usize).max(1);
    let sim = Simulator::new(scenario, &cfg).unwrap();
    ensemble_run(&sim, &cfg).unwrap()
}

fn fmt(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", items.join(", "))
}

fn laplacian_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_row, mut worst_sym, mut worst_eig) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for trial in 0..100 {
        let n = rng.random_range(2..=30);
        let n_slow = rng.random_range(1..=n);
        let spec = RandomGridSpec {
            n_slow,
            n_fast: n - n_slow,
            extra_edges: rng.random_range(0.0..1.5),
            ..Default::default()
        };
        let scenario = Scenario::new(random_grid(&spec, trial).unwrap()).unwrap();
        let j = scenario.reduced().unwrap().j_red;
        worst_row = worst_row.max(j.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max));
        worst_sym = worst_sym.max((&j - j.transpose()).amax());
        let mut eig: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        if let Some(&second) = eig.get(1) {
            worst_eig = worst_eig.max(second);
        }
    }
    check(
        worst_row < 1e-10 && worst_sym < 1e-12 && worst_eig < 0.0,
        format!("max |row sum| {worst_row:.1e}, max asymmetry {worst_sym:.1e}, largest nonzero eigenvalue {worst_eig:.3e}"),
    )
}

fn star_closed_forms() -> Outcome {
    let sigma = 0.01;
    let params = StarParams {
        sigma,
        ..Default::default()
    };
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for n in [4usize, 8, 16] {
        for center in [SpeedClass::Slow, SpeedClass::Fast] {
            let scenario = Scenario::new(make_star_grid(n, center, params).unwrap()).unwrap();
            let sys = scenario.linearized(1.0).unwrap();
            let basis = eigendecompose_reduced(&scenario.reduced().unwrap().j_red).unwrap();
            let gamma = gamma_matrix(&sys, &basis, &sys.sigma_fast).unwrap();
            match center {
                SpeedClass::Slow => {
                    let expected = sigma * sigma * n as f64;
                    worst_rel = worst_rel.max((gamma[(0, 0)] - expected).abs() / expected);
                }
                SpeedClass::Fast => {
                    let inner = gamma.view((1, 1), (n - 1, n - 1));
                    worst_abs = worst_abs.max(inner.amax());
                }
            }
        }
    }
    check(
        worst_rel < 1e-12 && worst_abs < 1e-10,
        format!("generator center: max rel error of sigma^2 N_F {worst_rel:.1e}; load center: max |Gamma_ab|, a,b >= 2 = {worst_abs:.1e}"),
    )
}

fn path3(sigma: [f64; 3]) -> Grid {
    let classes = [SpeedClass::Slow, SpeedClass::Fast, SpeedClass::Slow];
    let buses = (0..3)
        .map(|k| Bus {
            id: k as u32 + 1,
            speed_class: classes[k],
            inertia: 0.2,
            damping: 0.05,
            injection: 0.0,
            noise_sigma: sigma[k],
            noise_tau: 0.1,
            voltage: 1.0,
        })
        .collect();
    let lines = vec![
        Line { from: 1, to: 2, susceptance: 1.0 },
        Line { from: 2, to: 3, susceptance: 1.0 },
    ];
    Grid::new(buses, lines, None).unwrap()
}

fn xi_covariance() -> Outcome {
    let mut worst = 0.0f64;
    for sigma in [[0.0, 1.0, 0.0], [0.1, 0.2, 0.3]] {
        let red = Scenario::new(path3(sigma)).unwrap().reduced().unwrap();
        let spec = OuSpec {
            sigma: red.sigma_slow.iter().chain(red.sigma_fast.iter()).copied().collect(),
            tau: vec![0.1; 3],
            seed: 77,
        };
        // samples five correlation times apart are nearly independent
        let n = 100_000;
        let path = ou_sample_path(&spec, 0.5, n).unwrap();
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for row in path.row_iter() {
            let eta_s = DVector::from_vec(vec![row[0], row[1]]);
            let xi = eta_s + &red.noise_map * row[2];
            cov += &xi * xi.transpose();
        }
        cov /= n as f64;
        worst = worst.max((&cov - &red.sigma_xi).norm() / red.sigma_xi.norm());
    }
    check(worst < 0.05, format!("relative Frobenius error {:.2}% at 1e5 samples", 100.0 * worst))
}

fn ou_statistics() -> Outcome {
    let (sigma, tau, dt) = (0.5, 0.1, 0.025);
    let n = 1_000_000;
    let path = ou_sample_path(&OuSpec { sigma: vec![sigma], tau: vec![tau], seed: 3 }, dt, n).unwrap();
    let x = path.column(0);
    let var = x.dot(&x) / n as f64;
    let var_err = (var / (sigma * sigma) - 1.0).abs();
    let (mut acf_err, mut acf_rel) = (0.0f64, 0.0f64);
    let max_lag = (3.0 * tau / dt).round() as usize;
    for lag in 1..=max_lag {
        let c: f64 = (0..n - lag).map(|k| x[k] * x[k + lag]).sum::<f64>() / (n - lag) as f64;
        let expected = sigma * sigma * (-(lag as f64) * dt / tau).exp();
        acf_err = acf_err.max((c - expected).abs() / (sigma * sigma));
        acf_rel = acf_rel.max((c / expected - 1.0).abs());
    }
    check(
        var_err < 0.01 && acf_err < 0.02,
        format!(
            "variance error {:.2}%, autocovariance error over lags <= 3 tau: max {:.2}% of sigma^2 ({:.2}% of the lag value)",
            100.0 * var_err,
            100.0 * acf_err,
            100.0 * acf_rel
        ),
    )
}

fn analytic_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let taus = [0.05, 0.1, 0.5];
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let spec = RandomGridSpec {
            n_slow: rng.random_range(2..=8),
            n_fast: rng.random_range(0..=8),
            slow_m: rng.random_range(0.05..0.5),
            slow_d: rng.random_range(0.02..0.3),
            tau_slow: taus[rng.random_range(0..3)],
            tau_fast: taus[rng.random_range(0..3)],
            ..Default::default()
        };
        let red = Scenario::new(random_grid(&spec, 100 + trial).unwrap()).unwrap().reduced().unwrap();
        let formula = analytic(&red).var_total;
        let oracle = lyapunov_oracle_variance(&red).unwrap();
        let scale = oracle.iter().copied().fold(0.0, f64::max);
        for (a, o) in formula.iter().zip(&oracle) {
            worst = worst.max((a - o).abs() / o.abs().max(1e-9 * scale));
        }
    }
    check(worst < 1e-6, format!("max relative difference {worst:.1e} over 20 systems"))
}

fn simulation_vs_analytics() -> Outcome {
    let scenario = Scenario::new(homogeneous_test_grid()).unwrap();
    let expected = analytic(&scenario.reduced().unwrap()).var_total;
    let stats = ensemble(&scenario, ModelKind::ReducedXi, 0.01, 2000.0, 40.0, 10, 1.0);
    let ratios: Vec<f64> = stats.var_coi.iter().zip(&expected).map(|(s, a)| s / a).collect();
    let worst = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    check(worst < 0.10, format!("simulated / analytic per bus {}", fmt(&ratios)))
}

fn epsilon_limit() -> Outcome {
    let scenario = Scenario::new(homogeneous_test_grid()).unwrap();
    let (dt, t_end, burn_in, n) = (1e-3, 1000.0, 40.0, 4);
    let xi = ensemble(&scenario, ModelKind::ReducedXi, dt, t_end, burn_in, n, 1.0);
    let deviation = |eps: f64| {
        let full = ensemble(&scenario, ModelKind::FullLinear, dt, t_end, burn_in, n, eps);
        full.var_coi
            .iter()
            .zip(&xi.var_coi)
            .map(|(f, x)| (f / x - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let (d2, d3) = (deviation(1e-2), deviation(1e-3));
    check(
        d3 < d2 && d3 < 0.10,
        format!("max deviation from reduced-xi: {:.2}% at eps=1e-2, {:.2}% at eps=1e-3", 100.0 * d2, 100.0 * d3),
    )
}

fn naive_failure() -> Outcome {
    let (dt, t_end, burn_in, n) = (1e-3, 500.0, 40.0, 4);
    let loads = Scenario::new(star_of_loads_in_ring(EmbeddedStar::default()).unwrap()).unwrap();
    let center = loads.reduced().unwrap().slow_ids.iter().position(|&id| id == 1).unwrap();
    let naive = ensemble(&loads, ModelKind::ReducedNaive, dt, t_end, burn_in, n, 1.0).var_coi[center];
    let xi = ensemble(&loads, ModelKind::ReducedXi, dt, t_end, burn_in, n, 1.0).var_coi[center];
    let full = ensemble(&loads, ModelKind::FullNonlinear, dt, t_end, burn_in, n, 1e-3).var_coi[center];

    let gens = Scenario::new(star_of_generators_with_ring(EmbeddedStar::default()).unwrap()).unwrap();
    let g_naive = ensemble(&gens, ModelKind::ReducedNaive, dt, t_end, burn_in, n, 1.0).var_coi;
    let g_xi = ensemble(&gens, ModelKind::ReducedXi, dt, t_end, burn_in, n, 1.0).var_coi;
    let g_dev = g_naive
        .iter()
        .zip(&g_xi)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        xi / naive > 2.0 && full / naive > 2.0 && g_dev < 0.15,
        format!(
            "star of loads center: xi/naive {:.2}, full/naive {:.2}; star of generators: max naive vs xi deviation {:.2}%",
            xi / naive,
            full / naive,
            100.0 * g_dev
        ),
    )
}

fn integrator_order() -> Outcome {
    let scenario = Scenario::new(homogeneous_test_grid()).unwrap();
    let red = scenario.reduced().unwrap();
    let basis = eigendecompose_reduced(&red.j_red).unwrap();
    let channels = red.n_slow() + red.n_fast();
    let forcing = |t: f64, out: &mut DVector<f64>| {
        for k in 0..out.len() {
            out[k] = 0.01 * (1.3 * t + k as f64).sin() * (1.0 + 0.1 * k as f64);
        }
    };
    let t_end = 5.0;
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let mut cfg = SimConfig::new(ModelKind::ReducedXi, dt, t_end, 0.0);
            cfg.record_every = 1;
            let sim = integrate_reduced(&red, &cfg, NoiseMode::Xi, &mut DeterministicForcing::new(channels, dt, forcing), None).unwrap();
            let exact = modal_trajectory(&red, &basis, &mut DeterministicForcing::new(channels, dt, forcing), NoiseMode::Xi, dt, cfg.n_steps(), None).unwrap();
            let mut err = 0.0f64;
            for k in 0..sim.len() {
                let row = sim.x.row(k);
                let mean = row.mean();
                for i in 0..row.len() {
                    err = err.max((row[i] - mean - exact.x[(k, i)]).abs());
                }
            }
            err
        })
        .collect();
    let r1 = errors[0] / errors[1];
    let r2 = errors[1] / errors[2];
    check(
        r1 >= 2.0 && r2 >= 2.0,
        format!("max errors {:.2e}, {:.2e}, {:.2e}; reduction factors {r1:.2}, {r2:.2}", errors[0], errors[1], errors[2]),
    )
}

fn ieee118_smoke() -> Outcome {
    let defaults = MatpowerDefaults::default();
    let grid = ieee118(&defaults).unwrap().with_uniform_sigma(0.0, 0.01, 118).unwrap();
    let scenario = Scenario::new(grid).unwrap();
    let red = scenario.reduced().unwrap();
    let report = analytic(&red);
    let ranks = |v: &[f64]| kron_noise::cli::competition_ranks(v);
    let naive_rank = ranks(report.var_naive());
    let corrected_rank = ranks(&report.var_total);
    let changed = naive_rank.iter().zip(&corrected_rank).filter(|(a, b)| a != b).count();

    let run = |dir: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_kron-noise"))
            .args(["--seed", "118", "--out-dir"])
            .arg(dir)
            .args([
                "compare",
                "builtin:ieee118",
                "--models",
                "reduced-xi,reduced-naive,full-linear",
                "--t-end",
                "60",
                "--ensemble",
                "2",
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.join("compare.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path());
    let second = run(b.path());
    let cli_changes = String::from_utf8_lossy(&first)
        .lines()
        .skip(1)
        .filter(|l| !l.ends_with(",0"))
        .count();
    check(
        red.n_slow() == 54 && changed > 0 && cli_changes > 0 && first == second,
        format!(
            "N_S = {}, N_F = {}, {changed} buses change rank (analytic), {cli_changes} in the CLI table, reproducible: {}",
            red.n_slow(),
            red.n_fast(),
            first == second
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("laplacian preservation", 5, laplacian_preservation),
        ("star closed forms", 1, star_closed_forms),
        ("xi covariance", 10, xi_covariance),
        ("OU statistics", 10, ou_statistics),
        ("analytic vs Lyapunov oracle", 30, analytic_vs_oracle),
        ("simulation vs analytics", 300, simulation_vs_analytics),
        ("epsilon limit", 600, epsilon_limit),
        ("naive model failure", 300, naive_failure),
        ("integrator order", 60, integrator_order),
        ("IEEE-118 smoke", 900, ieee118_smoke),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(*budget);
        let (status, detail) = match (&outcome, in_budget) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("[{status}] {:>2} {name}: {detail} ({:.2} s)", k + 1, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
