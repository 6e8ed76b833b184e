use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::fixed_point::coupling_jacobian;
use super::{Grid, OperatingPoint};
use crate::error::{Error, Result};

/// Jacobian of the coupling term at the operating point, indexed like
/// [`Grid::buses`]. Off-diagonal `b_ij cos(theta_i - theta_j)`, zero row sums.
pub fn build_jacobian(grid: &Grid, op: &OperatingPoint) -> DMatrix<f64> {
    coupling_jacobian(grid, &op.theta_star)
}

/// Linearized two-timescale dynamics around a fixed point, with the slow
/// buses ordered first:
///
/// ```text
/// M_S x'' + D_S x'       = J_SS x + J_SF y + eta_S
/// eps (M_F y'' + D_F y') = J_FS x + J_FF y + eta_F
/// ```
///
/// `m_fast` and `d_fast` hold the unscaled fast parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub slow_ids: Vec<u32>,
    pub fast_ids: Vec<u32>,
    pub j_ss: DMatrix<f64>,
    pub j_sf: DMatrix<f64>,
    pub j_fs: DMatrix<f64>,
    pub j_ff: DMatrix<f64>,
    pub m_slow: DVector<f64>,
    pub d_slow: DVector<f64>,
    pub m_fast: DVector<f64>,
    pub d_fast: DVector<f64>,
    pub sigma_slow: DVector<f64>,
    pub sigma_fast: DVector<f64>,
    pub tau_slow: DVector<f64>,
    pub tau_fast: DVector<f64>,
    pub epsilon: f64,
}

impl LinearizedSystem {
    pub fn n_slow(&self) -> usize {
        self.slow_ids.len()
    }

    pub fn n_fast(&self) -> usize {
        self.fast_ids.len()
    }

    /// Full Jacobian in slow-then-fast order.
    pub fn full_jacobian(&self) -> DMatrix<f64> {
        let (ns, nf) = (self.n_slow(), self.n_fast());
        let mut j = DMatrix::zeros(ns + nf, ns + nf);
        j.view_mut((0, 0), (ns, ns)).copy_from(&self.j_ss);
        j.view_mut((0, ns), (ns, nf)).copy_from(&self.j_sf);
        j.view_mut((ns, 0), (nf, ns)).copy_from(&self.j_fs);
        j.view_mut((ns, ns), (nf, nf)).copy_from(&self.j_ff);
        j
    }

    /// Effective inertia and damping diagonals (fast block scaled by epsilon),
    /// slow-then-fast.
    pub fn scaled_inertia_damping(&self) -> (DVector<f64>, DVector<f64>) {
        let eps = self.epsilon;
        let m = DVector::from_iterator(
            self.n_slow() + self.n_fast(),
            self.m_slow.iter().copied().chain(self.m_fast.iter().map(|v| v * eps)),
        );
        let d = DVector::from_iterator(
            self.n_slow() + self.n_fast(),
            self.d_slow.iter().copied().chain(self.d_fast.iter().map(|v| v * eps)),
        );
        (m, d)
    }

    pub fn sigma(&self) -> DVector<f64> {
        concat(&self.sigma_slow, &self.sigma_fast)
    }

    pub fn tau(&self) -> DVector<f64> {
        concat(&self.tau_slow, &self.tau_fast)
    }

    /// Eigenpairs `(nu_alpha, w_alpha)` of `J_FF`, ascending.
    pub fn fast_eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.j_ff.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_columns(
            &order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>(),
        );
        (values, vectors)
    }
}

pub(crate) fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Splits the Jacobian into slow/fast blocks and collects the per-class
/// dynamic and noise parameters.
pub fn assemble_linearized(grid: &Grid, jac: &DMatrix<f64>, epsilon: f64) -> Result<LinearizedSystem> {
    if !(epsilon > 0.0) {
        return Err(Error::EpsilonNotPositive);
    }
    if epsilon > 1.0 {
        return Err(Error::EpsilonTooLarge(epsilon));
    }
    let n = grid.len();
    if jac.nrows() != n || jac.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Jacobian is {}x{}, grid has {n} buses",
            jac.nrows(),
            jac.ncols()
        )));
    }
    let slow = grid.slow_positions();
    let fast = grid.fast_positions();
    if slow.is_empty() {
        return Err(Error::EmptySlowSet);
    }
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| jac[(rows[r], cols[c])])
    };
    let param = |pos: &[usize], f: fn(&super::Bus) -> f64| {
        DVector::from_iterator(pos.len(), pos.iter().map(|&k| f(&grid.buses()[k])))
    };
    Ok(LinearizedSystem {
        slow_ids: slow.iter().map(|&k| grid.buses()[k].id).collect(),
        fast_ids: fast.iter().map(|&k| grid.buses()[k].id).collect(),
        j_ss: block(&slow, &slow),
        j_sf: block(&slow, &fast),
        j_fs: block(&fast, &slow),
        j_ff: block(&fast, &fast),
        m_slow: param(&slow, |b| b.inertia),
        d_slow: param(&slow, |b| b.damping),
        m_fast: param(&fast, |b| b.inertia),
        d_fast: param(&fast, |b| b.damping),
        sigma_slow: param(&slow, |b| b.noise_sigma),
        sigma_fast: param(&fast, |b| b.noise_sigma),
        tau_slow: param(&slow, |b| b.noise_tau),
        tau_fast: param(&fast, |b| b.noise_tau),
        epsilon,
    })
}
