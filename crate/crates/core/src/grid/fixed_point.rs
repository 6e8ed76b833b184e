use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// Synchronized state of a grid. Angles are indexed like [`Grid::buses`]
/// and have zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub theta_star: Vec<f64>,
    pub residual_norm: f64,
    /// Some connected pair has `|theta_i - theta_j| >= pi/2`.
    pub angle_window_violated: bool,
}

/// Power-flow residual `p_i - sum_j b_ij sin(theta_i - theta_j)`.
pub fn power_residual(grid: &Grid, theta: &[f64]) -> DVector<f64> {
    let mut r = DVector::from_iterator(grid.len(), grid.buses().iter().map(|b| b.injection));
    for (i, j, b) in grid.couplings() {
        let flow = b * (theta[i] - theta[j]).sin();
        r[i] -= flow;
        r[j] += flow;
    }
    r
}

/// Jacobian of [`power_residual`] at `theta`.
pub(crate) fn coupling_jacobian(grid: &Grid, theta: &[f64]) -> DMatrix<f64> {
    let n = grid.len();
    let mut jac = DMatrix::zeros(n, n);
    for (i, j, b) in grid.couplings() {
        let c = b * (theta[i] - theta[j]).cos();
        jac[(i, j)] += c;
        jac[(j, i)] += c;
        jac[(i, i)] -= c;
        jac[(j, j)] -= c;
    }
    jac
}

const MAX_HALVINGS: usize = 40;

/// Newton iteration for the lossless power-flow fixed point, working
/// orthogonally to the uniform angle shift.
pub fn solve_fixed_point(grid: &Grid, tol: f64, max_iter: usize) -> Result<OperatingPoint> {
    let n = grid.len();
    let scale = grid
        .buses()
        .iter()
        .map(|b| b.injection.abs())
        .fold(1.0, f64::max);
    let imbalance = grid.injection_sum();
    if imbalance.abs() > 1e-9 * scale * n as f64 {
        return Err(Error::Unbalanced(imbalance));
    }
    let uniform = DMatrix::from_element(n, n, 1.0 / n as f64);

    // DC-flow starting point
    let zeros = vec![0.0; n];
    let lap = coupling_jacobian(grid, &zeros);
    let p = DVector::from_iterator(n, grid.buses().iter().map(|b| b.injection));
    let mut theta = (&lap - &uniform)
        .lu()
        .solve(&(-&p))
        .ok_or(Error::SingularJacobian)?;
    let mean = theta.mean();
    theta.add_scalar_mut(-mean);

    let mut residual = power_residual(grid, theta.as_slice());
    let mut norm = residual.norm();
    let mut iterations = 0;
    while norm > tol {
        if iterations == max_iter {
            return Err(Error::NoFixedPoint {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let jac = coupling_jacobian(grid, theta.as_slice()) - &uniform;
        // A singular Newton matrix here means the iterate sits on a saddle of
        // the flow equations, which happens when no fixed point exists.
        let step = match jac.lu().solve(&(-&residual)) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => {
                return Err(Error::NoFixedPoint {
                    iterations,
                    residual: norm,
                })
            }
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &theta + &step * alpha;
            let trial_residual = power_residual(grid, trial.as_slice());
            let trial_norm = trial_residual.norm();
            if trial_norm < norm {
                theta = trial;
                residual = trial_residual;
                norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoFixedPoint {
                iterations,
                residual: norm,
            });
        }
        let mean = theta.mean();
        theta.add_scalar_mut(-mean);
    }

    let angle_window_violated = grid
        .couplings()
        .any(|(i, j, _)| (theta[i] - theta[j]).abs() >= FRAC_PI_2);
    Ok(OperatingPoint {
        theta_star: theta.iter().copied().collect(),
        residual_norm: norm,
        angle_window_violated,
    })
}
