use nalgebra::{DVector, SymmetricEigen};
use proptest::prelude::*;

use kron_noise::grid::{build_jacobian, parse_grid_json, power_residual, solve_fixed_point, Grid, OperatingPoint};
use kron_noise::kron::ReducedSystem;
use kron_noise::scenarios::{random_grid, RandomGridSpec};
use kron_noise::sim::Scenario;
use kron_noise::spectral::{
    coi_variance, eigendecompose_reduced, gamma_from_noise_map, gamma_matrix, lyapunov_oracle_variance,
    VarianceReport,
};

fn grid_strategy(min_slow: usize) -> impl Strategy<Value = Grid> {
    (min_slow..=6usize, 0..=6usize, 0.0..1.5f64, any::<u64>(), 0.02..0.5f64, 0.02..0.3f64).prop_map(
        |(n_slow, n_fast, extra, seed, m, d)| {
            let spec = RandomGridSpec {
                n_slow,
                n_fast,
                extra_edges: extra,
                slow_m: m,
                slow_d: d,
                ..Default::default()
            };
            random_grid(&spec, seed).unwrap()
        },
    )
}

fn report(red: &ReducedSystem) -> VarianceReport {
    let basis = eigendecompose_reduced(&red.j_red).unwrap();
    coi_variance(red, &basis, &gamma_from_noise_map(red, &basis)).unwrap()
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * scale.max(1e-300))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobian_is_a_laplacian_at_any_angles(grid in grid_strategy(1), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let op = OperatingPoint {
            theta_star: (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            residual_norm: 0.0,
            angle_window_violated: false,
        };
        let j = build_jacobian(&grid, &op);
        prop_assert!((&j - j.transpose()).amax() < 1e-12);
        prop_assert!(j.row_iter().all(|r| r.sum().abs() < 1e-10));
    }

    #[test]
    fn fixed_point_meets_tolerance(grid in grid_strategy(1)) {
        let op = solve_fixed_point(&grid, 1e-10, 100).unwrap();
        prop_assert!(power_residual(&grid, &op.theta_star).norm() <= 1e-10);
        let mean: f64 = op.theta_star.iter().sum::<f64>() / grid.len() as f64;
        prop_assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn stable_jacobian_is_negative_off_the_uniform_mode(grid in grid_strategy(1)) {
        let scenario = Scenario::new(grid).unwrap();
        prop_assume!(!scenario.op.angle_window_violated);
        let mut eig: Vec<f64> = SymmetricEigen::new(scenario.jacobian.clone()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(eig[0].abs() < 1e-9);
        prop_assert!(eig.iter().skip(1).all(|&v| v < 0.0));
    }

    #[test]
    fn grid_json_round_trip(grid in grid_strategy(1)) {
        let back = parse_grid_json(&grid.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, grid);
    }

    #[test]
    fn reduction_keeps_laplacian_and_psd_noise(grid in grid_strategy(1)) {
        let red = Scenario::new(grid).unwrap().reduced().unwrap();
        prop_assert!(red.j_red.row_iter().all(|r| r.sum().abs() < 1e-10));
        prop_assert!((&red.j_red - red.j_red.transpose()).amax() < 1e-12);
        let eig = SymmetricEigen::new(red.sigma_xi.clone()).eigenvalues;
        prop_assert!(eig.iter().all(|&v| v > -1e-15));
    }

    #[test]
    fn gamma_is_symmetric_psd(grid in grid_strategy(2)) {
        let scenario = Scenario::new(grid).unwrap();
        let sys = scenario.linearized(1.0).unwrap();
        let basis = eigendecompose_reduced(&scenario.reduced().unwrap().j_red).unwrap();
        let gamma = gamma_matrix(&sys, &basis, &sys.sigma_fast).unwrap();
        prop_assert!((&gamma - gamma.transpose()).amax() < 1e-15);
        let eig = SymmetricEigen::new(gamma).eigenvalues;
        prop_assert!(eig.iter().all(|&v| v > -1e-15));
    }

    #[test]
    fn variance_is_quadratic_in_sigma(grid in grid_strategy(2), c in 0.1..10.0f64) {
        let red = Scenario::new(grid).unwrap().reduced().unwrap();
        let scaled = red.with_sigma(&red.sigma_slow * c, &red.sigma_fast * c).unwrap();
        let base: Vec<f64> = report(&red).var_total.iter().map(|v| v * c * c).collect();
        prop_assert!(close(&base, &report(&scaled).var_total, 1e-10));
    }

    #[test]
    fn slow_and_fast_parts_are_additive(grid in grid_strategy(2)) {
        let red = Scenario::new(grid).unwrap().reduced().unwrap();
        let full = report(&red);
        let slow_only = report(&red.with_sigma(red.sigma_slow.clone(), DVector::zeros(red.n_fast())).unwrap());
        let fast_only = report(&red.with_sigma(DVector::zeros(red.n_slow()), red.sigma_fast.clone()).unwrap());
        prop_assert!(close(&full.var_slow, &slow_only.var_total, 1e-12));
        prop_assert!(close(&full.var_fast, &fast_only.var_total, 1e-12));
        let sum: Vec<f64> = full.var_slow.iter().zip(&full.var_fast).map(|(a, b)| a + b).collect();
        prop_assert!(close(&full.var_total, &sum, 1e-12));
    }

    #[test]
    fn variance_follows_bus_relabeling(grid in grid_strategy(2), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut buses = grid.buses().to_vec();
        buses.shuffle(&mut rng);
        let shuffled = Grid::new(buses, grid.lines().to_vec(), None).unwrap();

        let a = report(&Scenario::new(grid).unwrap().reduced().unwrap());
        let b = report(&Scenario::new(shuffled).unwrap().reduced().unwrap());
        let lookup = |r: &VarianceReport, id: u32| r.var_total[r.bus_ids.iter().position(|&x| x == id).unwrap()];
        let va: Vec<f64> = a.bus_ids.iter().map(|&id| lookup(&a, id)).collect();
        let vb: Vec<f64> = a.bus_ids.iter().map(|&id| lookup(&b, id)).collect();
        prop_assert!(close(&va, &vb, 1e-9));
    }

    #[test]
    fn formula_matches_lyapunov_oracle(grid in grid_strategy(2)) {
        let red = Scenario::new(grid).unwrap().reduced().unwrap();
        prop_assert!(close(&report(&red).var_total, &lyapunov_oracle_variance(&red).unwrap(), 1e-8));
    }
}
