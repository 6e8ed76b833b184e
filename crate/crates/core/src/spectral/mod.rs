//! Modal analysis of the reduced Jacobian and the stationary frequency
//! variances it implies.

mod kernel;
mod lyapunov;
mod modal;
mod variance;

pub use kernel::{h_kernel, ou_velocity_kernel};
pub use lyapunov::{
    lyapunov_oracle_variance, solve_lyapunov, solve_lyapunov_kronecker, stationary_covariance,
};
pub use modal::modal_trajectory;
pub use variance::{
    coi_variance, gamma_from_noise_map, gamma_matrix, homogeneous_parameters, HomogeneousParams,
    VarianceReport,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenpairs of `J_red`, sorted `0 = lambda_1 > lambda_2 >= ...`, with the
/// first column exactly the uniform vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    pub lambdas: DVector<f64>,
    /// Orthonormal eigenvectors as columns.
    pub modes: DMatrix<f64>,
}

impl ModalBasis {
    pub const ZERO_MODE: usize = 0;

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Checks symmetry and zero row sums of a Laplacian-like matrix. Tolerances
/// are relative to the largest entry.
pub fn check_laplacian(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotLaplacian(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > tol * scale {
        return Err(Error::NotLaplacian(format!("asymmetry {asym:e}")));
    }
    let row_sum = a.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    if row_sum > tol * scale * a.nrows() as f64 {
        return Err(Error::NotLaplacian(format!("row sum {row_sum:e}")));
    }
    Ok(())
}

/// Symmetric eigendecomposition of `J_red` with the zero mode snapped to the
/// exact uniform vector and the other modes re-orthogonalized against it.
pub fn eigendecompose_reduced(j_red: &DMatrix<f64>) -> Result<ModalBasis> {
    check_laplacian(j_red, 1e-9)?;
    let n = j_red.nrows();
    let scale = j_red.amax().max(1.0);
    let eig = SymmetricEigen::new(j_red.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let zero_tol = 1e-9 * scale;
    let top = eig.eigenvalues[order[0]];
    if top.abs() >= zero_tol {
        return Err(Error::NotLaplacian(format!("largest eigenvalue {top:e} is not zero")));
    }
    if n > 1 && eig.eigenvalues[order[1]] > -zero_tol {
        return Err(Error::ZeroModeNotSimple);
    }

    let mut lambdas = DVector::zeros(n);
    let mut modes = DMatrix::zeros(n, n);
    modes.column_mut(0).fill(1.0 / (n as f64).sqrt());
    for (slot, &k) in order.iter().enumerate().skip(1) {
        lambdas[slot] = eig.eigenvalues[k];
        let mut v = eig.eigenvectors.column(k).into_owned();
        for prev in 0..slot {
            let proj = modes.column(prev).dot(&v);
            v.axpy(-proj, &modes.column(prev), 1.0);
        }
        let norm = v.norm();
        modes.set_column(slot, &(v / norm));
    }
    Ok(ModalBasis { lambdas, modes })
}
