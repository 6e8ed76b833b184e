use crate::error::{Error, Result};

fn checked(factor: &'static str, value: f64, scale: f64) -> Result<f64> {
    if value.abs() < 1e-14 * scale || !value.is_finite() {
        Err(Error::DegenerateKernel { factor, value })
    } else {
        Ok(value)
    }
}

/// Two-mode kernel
///
/// ```text
/// H = 1/2 [2 g m S (g tau + 1) + 4 g la lb tau^2 - tau D^2]
///     / [(2 g^2 m S + D^2)(g m tau + la tau^2 + m)(g m tau + lb tau^2 + m)]
/// ```
///
/// with `S = la + lb`, `D = la - lb`, `g = d / m`. Evaluated exactly as
/// written, in whatever sign convention `la`, `lb` are given. For the
/// eigenvalues of `J_red` (which are <= 0) use [`ou_velocity_kernel`].
pub fn h_kernel(la: f64, lb: f64, tau: f64, gamma: f64, m: f64) -> Result<f64> {
    let sum = la + lb;
    let diff = la - lb;
    let num = 0.5 * (2.0 * gamma * m * sum * (gamma * tau + 1.0) + 4.0 * gamma * la * lb * tau * tau
        - tau * diff * diff);
    let mix = checked(
        "2 gamma^2 m (la + lb) + (la - lb)^2",
        2.0 * gamma * gamma * m * sum + diff * diff,
        2.0 * gamma * gamma * m * sum.abs() + diff * diff,
    )?;
    let resolvent = |l: f64, name| {
        checked(
            name,
            gamma * m * tau + l * tau * tau + m,
            gamma * m * tau + (l * tau * tau).abs() + m,
        )
    };
    let ra = resolvent(la, "gamma m tau + la tau^2 + m")?;
    let rb = resolvent(lb, "gamma m tau + lb tau^2 + m")?;
    Ok(num / (mix * ra * rb))
}

/// Stationary cross-covariance `<z_a' z_b'>` of two modes
/// `m z'' + d z' = lambda z + f` driven by a common unit-variance OU forcing
/// with correlation time `tau`. `la`, `lb` are eigenvalues of `J_red`
/// (negative); this is `2 tau H(-la, -lb, tau, gamma)`.
pub fn ou_velocity_kernel(la: f64, lb: f64, tau: f64, gamma: f64, m: f64) -> Result<f64> {
    Ok(2.0 * tau * h_kernel(-la, -lb, tau, gamma, m)?)
}
