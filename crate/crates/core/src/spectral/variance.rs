use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::kernel::ou_velocity_kernel;
use super::ModalBasis;
use crate::error::{Error, Result};
use crate::grid::LinearizedSystem;
use crate::kron::{FastBlock, ReducedSystem};

/// `Gamma = G^T diag(sigma_F^2) G` with `G = J_FF^-1 J_FS U`.
pub fn gamma_matrix(
    sys: &LinearizedSystem,
    basis: &ModalBasis,
    sigma_fast: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let ns = sys.n_slow();
    if basis.modes.nrows() != ns || sigma_fast.len() != sys.n_fast() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows and sigma_F {} entries for N_S = {ns}, N_F = {}",
            basis.modes.nrows(),
            sigma_fast.len(),
            sys.n_fast()
        )));
    }
    if sys.n_fast() == 0 {
        return Ok(DMatrix::zeros(ns, ns));
    }
    let fast = FastBlock::new(&sys.j_ff)?;
    // sign is irrelevant in the quadratic form
    let g = fast.solve_neg(&(&sys.j_fs * &basis.modes));
    Ok(weighted_gram(&g, sigma_fast))
}

/// Same matrix from the noise map: `U^T K diag(sigma_F^2) K^T U`.
pub fn gamma_from_noise_map(red: &ReducedSystem, basis: &ModalBasis) -> DMatrix<f64> {
    if red.n_fast() == 0 {
        return DMatrix::zeros(red.n_slow(), red.n_slow());
    }
    let g = red.noise_map.transpose() * &basis.modes;
    weighted_gram(&g, &red.sigma_fast)
}

fn weighted_gram(g: &DMatrix<f64>, sigma: &DVector<f64>) -> DMatrix<f64> {
    let mut weighted = g.clone();
    for (mut row, s) in weighted.row_iter_mut().zip(sigma.iter()) {
        row *= s * s;
    }
    let gamma = g.transpose() * weighted;
    (&gamma + gamma.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneousParams {
    pub m: f64,
    pub d: f64,
    pub gamma: f64,
    pub tau_slow: f64,
    /// Absent when there are no fast buses.
    pub tau_fast: Option<f64>,
}

fn uniform(values: &DVector<f64>, what: &str) -> Result<Option<f64>> {
    let Some(&first) = values.iter().next() else {
        return Ok(None);
    };
    if values.iter().any(|&v| (v - first).abs() > 1e-12 * first.abs()) {
        return Err(Error::Heterogeneous(format!("{what} varies across buses")));
    }
    Ok(Some(first))
}

/// Extracts the common `m`, `d`, `tau_S`, `tau_F`; `gamma = d / m`.
pub fn homogeneous_parameters(red: &ReducedSystem) -> Result<HomogeneousParams> {
    let m = uniform(&red.m_slow, "slow inertia")?.ok_or(Error::EmptySlowSet)?;
    let d = uniform(&red.d_slow, "slow damping")?.ok_or(Error::EmptySlowSet)?;
    let tau_slow = uniform(&red.tau_slow, "slow tau")?.ok_or(Error::EmptySlowSet)?;
    let tau_fast = uniform(&red.tau_fast, "fast tau")?;
    Ok(HomogeneousParams {
        m,
        d,
        gamma: d / m,
        tau_slow,
        tau_fast,
    })
}

/// Per-bus stationary center-of-inertia frequency variance, split by the
/// origin of the noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub bus_ids: Vec<u32>,
    pub var_total: Vec<f64>,
    pub var_slow: Vec<f64>,
    pub var_fast: Vec<f64>,
    pub params: HomogeneousParams,
}

impl VarianceReport {
    /// Variance predicted when only the slow buses' own noise is kept.
    pub fn var_naive(&self) -> &[f64] {
        &self.var_slow
    }

    /// Row order by ascending naive variance (ties by bus id).
    pub fn naive_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bus_ids.len()).collect();
        order.sort_by(|&a, &b| {
            self.var_slow[a]
                .total_cmp(&self.var_slow[b])
                .then(self.bus_ids[a].cmp(&self.bus_ids[b]))
        });
        order
    }

    pub fn write_csv<W: Write>(&self, out: W, order_by_naive: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bus_id", "var_total", "var_slow_part", "var_fast_part", "var_naive"])?;
        let order: Vec<usize> = if order_by_naive {
            self.naive_order()
        } else {
            (0..self.bus_ids.len()).collect()
        };
        for k in order {
            w.write_record([
                self.bus_ids[k].to_string(),
                self.var_total[k].to_string(),
                self.var_slow[k].to_string(),
                self.var_fast[k].to_string(),
                self.var_slow[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sum_{a,b >= 2} u_{a,i} u_{b,i} C_ab H_ab` for every bus `i`.
fn modal_sum(basis: &ModalBasis, coupling: &DMatrix<f64>, kernel: &DMatrix<f64>) -> Vec<f64> {
    let n = basis.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for a in 1..n {
                let ua = basis.modes[(i, a)];
                for b in 1..n {
                    acc += ua * basis.modes[(i, b)] * coupling[(a, b)] * kernel[(a, b)];
                }
            }
            acc
        })
        .collect()
}

fn kernel_matrix(basis: &ModalBasis, tau: f64, p: &HomogeneousParams) -> Result<DMatrix<f64>> {
    let n = basis.len();
    let mut h = DMatrix::zeros(n, n);
    for a in 1..n {
        for b in a..n {
            let v = ou_velocity_kernel(basis.lambdas[a], basis.lambdas[b], tau, p.gamma, p.m)?;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(h)
}

/// Closed-form stationary COI frequency variance of the reduced model with
/// correlated noise `xi = eta_S + K eta_F`, zero mode excluded.
///
/// The slow part couples modes through
/// `sum_j sigma_{S,j}^2 u_{a,j} u_{b,j}`, the fast part through `Gamma`.
/// Requires homogeneous slow `m`, `d` and per-class homogeneous `tau`.
pub fn coi_variance(
    red: &ReducedSystem,
    basis: &ModalBasis,
    gamma: &DMatrix<f64>,
) -> Result<VarianceReport> {
    let params = homogeneous_parameters(red)?;
    let n = red.n_slow();
    if basis.len() != n || gamma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "basis of size {} and Gamma {:?} for N_S = {n}",
            basis.len(),
            gamma.shape()
        )));
    }

    let sigma2 = red.sigma_slow.map(|s| s * s);
    let mut slow_coupling = DMatrix::zeros(n, n);
    for a in 1..n {
        for b in 1..n {
            slow_coupling[(a, b)] = (0..n)
                .map(|j| sigma2[j] * basis.modes[(j, a)] * basis.modes[(j, b)])
                .sum();
        }
    }
    let var_slow = modal_sum(basis, &slow_coupling, &kernel_matrix(basis, params.tau_slow, &params)?);
    let var_fast = match params.tau_fast {
        Some(tau_fast) if gamma.amax() > 0.0 => {
            modal_sum(basis, gamma, &kernel_matrix(basis, tau_fast, &params)?)
        }
        _ => vec![0.0; n],
    };
    // roundoff can leave tiny negative values where the true variance is 0
    let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let var_slow = clamp(var_slow);
    let var_fast = clamp(var_fast);
    let var_total = var_slow.iter().zip(&var_fast).map(|(a, b)| a + b).collect();
    Ok(VarianceReport {
        bus_ids: red.slow_ids.clone(),
        var_total,
        var_slow,
        var_fast,
        params,
    })
}
