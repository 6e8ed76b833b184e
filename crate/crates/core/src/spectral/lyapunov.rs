//! Stationary covariances of linear systems driven by OU noise, computed
//! without any modal decomposition. Serves as the reference for the
//! closed-form variances and covers heterogeneous inertia and damping.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kron::ReducedSystem;

/// Solves `A X + X A^T + Q = 0` for stable `A` with the scaled matrix-sign
/// iteration.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    check_stable(a)?;
    let mut ak = a.clone();
    let mut qk = q.clone();
    let mut scaling = true;
    for _ in 0..100 {
        let lu = ak.clone().lu();
        let c = if scaling {
            let log_det: f64 = lu.u().diagonal().iter().map(|v| v.abs().ln()).sum();
            (log_det / n as f64).exp()
        } else {
            1.0
        };
        let inv = lu.try_inverse().ok_or(Error::Unstable(0.0))?;
        let next_a = (&ak / c + &inv * c) * 0.5;
        let next_q = (&qk / c + &inv * &qk * inv.transpose() * c) * 0.5;
        let change = (&next_a - &ak).amax() / next_a.amax().max(1.0);
        ak = next_a;
        qk = (&next_q + next_q.transpose()) * 0.5;
        if change < 1e-2 {
            scaling = false;
        }
        if change < 1e-13 {
            return Ok(qk * 0.5);
        }
    }
    Err(Error::LyapunovNoConvergence)
}

/// Direct solve through the `n^2` Kronecker system. Only for small `n`.
pub fn solve_lyapunov_kronecker(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice((-q).as_slice());
    let x = op.lu().solve(&rhs).ok_or(Error::Unstable(0.0))?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

fn check_stable(a: &DMatrix<f64>) -> Result<()> {
    let top = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if top >= 0.0 {
        Err(Error::Unstable(top))
    } else {
        Ok(())
    }
}

/// Orthonormal basis of the complement of the uniform vector (Helmert).
fn helmert(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            p[(i, k - 1)] = 1.0 / norm;
        }
        p[(k, k - 1)] = -(k as f64) / norm;
    }
    p
}

/// Stationary covariance of the augmented state `(P^T x, x', eta_S, eta_F)`
/// of the reduced model `M x'' + D x' = J_red x + eta_S + K eta_F`, with each
/// noise channel an independent OU process of variance `sigma^2`.
/// Returns the covariance of `x'`.
pub fn stationary_covariance(red: &ReducedSystem) -> Result<DMatrix<f64>> {
    let ns = red.n_slow();
    let nf = red.n_fast();
    let p = helmert(ns);
    let nz = ns - 1;
    let dim = nz + ns + ns + nf;
    let (iz, iv, is, i_f) = (0, nz, nz + ns, nz + 2 * ns);

    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((iz, iv), (nz, ns)).copy_from(&p.transpose());
    let m_inv = red.m_slow.map(|m| 1.0 / m);
    let jp = &red.j_red * &p;
    for i in 0..ns {
        for k in 0..nz {
            a[(iv + i, iz + k)] = m_inv[i] * jp[(i, k)];
        }
        a[(iv + i, iv + i)] = -red.d_slow[i] * m_inv[i];
        a[(iv + i, is + i)] = m_inv[i];
        for f in 0..nf {
            a[(iv + i, i_f + f)] = m_inv[i] * red.noise_map[(i, f)];
        }
    }
    let mut q = DMatrix::zeros(dim, dim);
    let channels = red
        .sigma_slow
        .iter()
        .zip(red.tau_slow.iter())
        .chain(red.sigma_fast.iter().zip(red.tau_fast.iter()));
    for (k, (&sigma, &tau)) in channels.enumerate() {
        a[(is + k, is + k)] = -1.0 / tau;
        q[(is + k, is + k)] = 2.0 * sigma * sigma / tau;
    }
    let cov = solve_lyapunov(&a, &q)?;
    Ok(cov.view((iv, iv), (ns, ns)).into_owned())
}

/// Per-bus stationary COI frequency variance of the reduced model from the
/// Lyapunov equation. Accepts heterogeneous `m_i`, `d_i`, `tau_i`.
pub fn lyapunov_oracle_variance(red: &ReducedSystem) -> Result<Vec<f64>> {
    let ns = red.n_slow();
    if ns == 1 {
        return Ok(vec![0.0]);
    }
    let cov = stationary_covariance(red)?;
    let centering =
        DMatrix::<f64>::identity(ns, ns) - DMatrix::from_element(ns, ns, 1.0 / ns as f64);
    let coi = &centering * cov * &centering;
    Ok(coi.diagonal().iter().map(|v| v.max(0.0)).collect())
}
