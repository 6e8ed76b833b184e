//! Kron reduction of the linearized system onto the slow buses, including
//! the map through which fast-bus noise reaches the retained buses.
//!
//! In the limit of instantaneous fast buses the slow dynamics read
//! `M_S x'' + D_S x' = J_red x + xi` with
//!
//! ```text
//! J_red = J_SS - J_SF J_FF^-1 J_FS
//! xi    = eta_S + K eta_F,   K = -J_SF J_FF^-1
//! ```
//!
//! so that uncorrelated fast-bus noise becomes correlated across slow buses.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bus, Grid, Line, LinearizedSystem, SpeedClass};

/// The reduced slow-bus model with its correlated effective noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub slow_ids: Vec<u32>,
    pub fast_ids: Vec<u32>,
    pub j_red: DMatrix<f64>,
    /// `K = -J_SF J_FF^-1`, `N_S x N_F`.
    pub noise_map: DMatrix<f64>,
    pub sigma_slow: DVector<f64>,
    pub sigma_fast: DVector<f64>,
    /// Equal-time covariance of `xi`.
    pub sigma_xi: DMatrix<f64>,
    pub m_slow: DVector<f64>,
    pub d_slow: DVector<f64>,
    pub tau_slow: DVector<f64>,
    pub tau_fast: DVector<f64>,
}

/// Factorization of `-J_FF` shared by the reduction routines.
pub(crate) struct FastBlock {
    chol: Option<Cholesky<f64, Dyn>>,
}

impl FastBlock {
    pub(crate) fn new(j_ff: &DMatrix<f64>) -> Result<Self> {
        if j_ff.is_empty() {
            return Ok(FastBlock { chol: None });
        }
        let neg = -j_ff;
        match Cholesky::new(neg.clone()) {
            Some(chol) => {
                // Cholesky can succeed on a numerically singular block
                let diag_min = chol.l_dirty().diagonal().iter().copied().fold(f64::INFINITY, f64::min);
                let scale = neg.diagonal().iter().copied().fold(0.0, f64::max);
                if diag_min * diag_min <= 1e-14 * scale {
                    return Err(Self::offending(j_ff));
                }
                Ok(FastBlock { chol: Some(chol) })
            }
            None => Err(Self::offending(j_ff)),
        }
    }

    fn offending(j_ff: &DMatrix<f64>) -> Error {
        let eig = SymmetricEigen::new(j_ff.clone());
        let eigenvalue = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Error::IndefiniteFastBlock { eigenvalue }
    }

    /// Solves `(-J_FF) X = rhs`.
    pub(crate) fn solve_neg(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(chol) => chol.solve(rhs),
            None => rhs.clone(),
        }
    }
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `J_red = J_SS - J_SF J_FF^-1 J_FS`, symmetrized.
pub fn schur_reduce(sys: &LinearizedSystem) -> Result<DMatrix<f64>> {
    let fast = FastBlock::new(&sys.j_ff)?;
    Ok(schur_with(sys, &fast))
}

fn schur_with(sys: &LinearizedSystem, fast: &FastBlock) -> DMatrix<f64> {
    if sys.n_fast() == 0 {
        return symmetrize(&sys.j_ss);
    }
    let g = fast.solve_neg(&sys.j_fs);
    symmetrize(&(&sys.j_ss + &sys.j_sf * g))
}

/// `K = -J_SF J_FF^-1`. Row `i` holds the weights with which each fast
/// bus's noise enters slow bus `i`.
pub fn noise_map(sys: &LinearizedSystem) -> Result<DMatrix<f64>> {
    let fast = FastBlock::new(&sys.j_ff)?;
    Ok(noise_map_with(sys, &fast))
}

fn noise_map_with(sys: &LinearizedSystem, fast: &FastBlock) -> DMatrix<f64> {
    if sys.n_fast() == 0 {
        return DMatrix::zeros(sys.n_slow(), 0);
    }
    // K^T = (-J_FF)^-1 J_FS
    fast.solve_neg(&sys.j_fs).transpose()
}

/// `Sigma_xi = diag(sigma_S^2) + K diag(sigma_F^2) K^T`.
pub fn effective_noise_covariance(
    noise_map: &DMatrix<f64>,
    sigma_slow: &DVector<f64>,
    sigma_fast: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let ns = sigma_slow.len();
    if noise_map.nrows() != ns || noise_map.ncols() != sigma_fast.len() {
        return Err(Error::DimensionMismatch(format!(
            "noise map is {}x{}, expected {}x{}",
            noise_map.nrows(),
            noise_map.ncols(),
            ns,
            sigma_fast.len()
        )));
    }
    let mut cov = DMatrix::from_diagonal(&sigma_slow.map(|s| s * s));
    if !sigma_fast.is_empty() {
        let mut weighted = noise_map.clone();
        for (mut col, s) in weighted.column_iter_mut().zip(sigma_fast.iter()) {
            col *= s * s;
        }
        cov += weighted * noise_map.transpose();
    }
    Ok(symmetrize(&cov))
}

impl ReducedSystem {
    pub fn from_linearized(sys: &LinearizedSystem) -> Result<Self> {
        let fast = FastBlock::new(&sys.j_ff)?;
        let j_red = schur_with(sys, &fast);
        let k = noise_map_with(sys, &fast);
        let sigma_xi = effective_noise_covariance(&k, &sys.sigma_slow, &sys.sigma_fast)?;
        Ok(ReducedSystem {
            slow_ids: sys.slow_ids.clone(),
            fast_ids: sys.fast_ids.clone(),
            j_red,
            noise_map: k,
            sigma_slow: sys.sigma_slow.clone(),
            sigma_fast: sys.sigma_fast.clone(),
            sigma_xi,
            m_slow: sys.m_slow.clone(),
            d_slow: sys.d_slow.clone(),
            tau_slow: sys.tau_slow.clone(),
            tau_fast: sys.tau_fast.clone(),
        })
    }

    pub fn n_slow(&self) -> usize {
        self.slow_ids.len()
    }

    pub fn n_fast(&self) -> usize {
        self.fast_ids.len()
    }

    /// Same reduction with rescaled noise amplitudes.
    pub fn with_sigma(&self, sigma_slow: DVector<f64>, sigma_fast: DVector<f64>) -> Result<Self> {
        let sigma_xi = effective_noise_covariance(&self.noise_map, &sigma_slow, &sigma_fast)?;
        Ok(ReducedSystem {
            sigma_slow,
            sigma_fast,
            sigma_xi,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReducedSystemJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ReducedSystemJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Row-major JSON form of [`ReducedSystem`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReducedSystemJson {
    slow_ids: Vec<u32>,
    fast_ids: Vec<u32>,
    j_red: Vec<Vec<f64>>,
    noise_map: Vec<Vec<f64>>,
    sigma_slow: Vec<f64>,
    sigma_fast: Vec<f64>,
    sigma_xi: Vec<Vec<f64>>,
    m_slow: Vec<f64>,
    d_slow: Vec<f64>,
    tau_slow: Vec<f64>,
    tau_fast: Vec<f64>,
}

impl From<&ReducedSystem> for ReducedSystemJson {
    fn from(r: &ReducedSystem) -> Self {
        let v = |x: &DVector<f64>| x.iter().copied().collect();
        ReducedSystemJson {
            slow_ids: r.slow_ids.clone(),
            fast_ids: r.fast_ids.clone(),
            j_red: rows(&r.j_red),
            noise_map: rows(&r.noise_map),
            sigma_slow: v(&r.sigma_slow),
            sigma_fast: v(&r.sigma_fast),
            sigma_xi: rows(&r.sigma_xi),
            m_slow: v(&r.m_slow),
            d_slow: v(&r.d_slow),
            tau_slow: v(&r.tau_slow),
            tau_fast: v(&r.tau_fast),
        }
    }
}

impl TryFrom<ReducedSystemJson> for ReducedSystem {
    type Error = Error;

    fn try_from(raw: ReducedSystemJson) -> Result<Self> {
        let ns = raw.slow_ids.len();
        let nf = raw.fast_ids.len();
        let vec = |x: Vec<f64>, n: usize, what: &str| {
            if x.len() == n {
                Ok(DVector::from_vec(x))
            } else {
                Err(Error::DimensionMismatch(format!("{what}: expected {n} entries")))
            }
        };
        let noise_map = from_rows(&raw.noise_map, nf, "noise_map")?;
        if noise_map.nrows() != ns {
            return Err(Error::DimensionMismatch("noise_map rows".into()));
        }
        let j_red = from_rows(&raw.j_red, ns, "j_red")?;
        let sigma_xi = from_rows(&raw.sigma_xi, ns, "sigma_xi")?;
        if j_red.nrows() != ns || sigma_xi.nrows() != ns {
            return Err(Error::DimensionMismatch("j_red / sigma_xi rows".into()));
        }
        Ok(ReducedSystem {
            j_red,
            noise_map,
            sigma_xi,
            sigma_slow: vec(raw.sigma_slow, ns, "sigma_slow")?,
            sigma_fast: vec(raw.sigma_fast, nf, "sigma_fast")?,
            m_slow: vec(raw.m_slow, ns, "m_slow")?,
            d_slow: vec(raw.d_slow, ns, "d_slow")?,
            tau_slow: vec(raw.tau_slow, ns, "tau_slow")?,
            tau_fast: vec(raw.tau_fast, nf, "tau_fast")?,
            slow_ids: raw.slow_ids,
            fast_ids: raw.fast_ids,
        })
    }
}

/// Parameters shared by every bus of a star grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarParams {
    pub coupling: f64,
    pub sigma: f64,
    pub inertia: f64,
    pub damping: f64,
    pub tau: f64,
}

impl Default for StarParams {
    fn default() -> Self {
        StarParams {
            coupling: 1.0,
            sigma: 0.01,
            inertia: 0.2,
            damping: 0.05,
            tau: 0.1,
        }
    }
}

/// Star with center bus 1 of class `center_class` and `n_outer` leaves
/// (ids `2..=n_outer+1`) of the opposite class; zero injections.
pub fn make_star_grid(n_outer: usize, center_class: SpeedClass, params: StarParams) -> Result<Grid> {
    if n_outer == 0 {
        return Err(Error::Config("star needs at least one outer bus".into()));
    }
    let bus = |id: u32, class| Bus {
        id,
        speed_class: class,
        inertia: params.inertia,
        damping: params.damping,
        injection: 0.0,
        noise_sigma: params.sigma,
        noise_tau: params.tau,
        voltage: 1.0,
    };
    let mut buses = vec![bus(1, center_class)];
    let mut lines = Vec::with_capacity(n_outer);
    for k in 0..n_outer as u32 {
        buses.push(bus(k + 2, center_class.opposite()));
        lines.push(Line {
            from: 1,
            to: k + 2,
            susceptance: params.coupling,
        });
    }
    Grid::new(buses, lines, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_linearized, build_jacobian, OperatingPoint};

    fn at_zero(grid: &Grid) -> LinearizedSystem {
        let op = OperatingPoint {
            theta_star: vec![0.0; grid.len()],
            residual_norm: 0.0,
            angle_window_violated: false,
        };
        assemble_linearized(grid, &build_jacobian(grid, &op), 1.0).unwrap()
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

    #[test]
    fn leaf_reduction() {
        let grid = make_star_grid(1, SpeedClass::Slow, StarParams::default()).unwrap();
        let sys = at_zero(&grid);
        let red = ReducedSystem::from_linearized(&sys).unwrap();
        assert!(red.j_red[(0, 0)].abs() < 1e-15);
        assert!((red.noise_map[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_reduction_matches_hand_values() {
        let sys = at_zero(&path3([0.0, 1.0, 0.0]));
        let j_red = schur_reduce(&sys).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]);
        assert!((j_red - expected).abs().max() < 1e-15);
        let k = noise_map(&sys).unwrap();
        assert!((k - DMatrix::from_column_slice(2, 1, &[0.5, 0.5])).abs().max() < 1e-15);
        let red = ReducedSystem::from_linearized(&sys).unwrap();
        let expected = DMatrix::from_element(2, 2, 0.25);
        assert!((&red.sigma_xi - expected).abs().max() < 1e-15);
    }

    #[test]
    fn star_with_load_center_is_rank_one_update() {
        let n = 5;
        let grid = make_star_grid(n, SpeedClass::Fast, StarParams::default()).unwrap();
        let sys = at_zero(&grid);
        assert_eq!(sys.j_ss, -DMatrix::<f64>::identity(n, n));
        assert_eq!(sys.j_ff[(0, 0)], -(n as f64));
        assert!(sys.j_sf.iter().all(|&v| v == 1.0));
        let j_red = schur_reduce(&sys).unwrap();
        let expected =
            -DMatrix::<f64>::identity(n, n) + DMatrix::from_element(n, n, 1.0 / n as f64);
        assert!((j_red - expected).abs().max() < 1e-14);
    }

    #[test]
    fn star_with_generator_center_blocks() {
        let grid = make_star_grid(5, SpeedClass::Slow, StarParams::default()).unwrap();
        let sys = at_zero(&grid);
        assert_eq!(sys.j_ss[(0, 0)], -5.0);
        assert_eq!(sys.j_ff, -DMatrix::<f64>::identity(5, 5));
        let grid = make_star_grid(1, SpeedClass::Fast, StarParams::default()).unwrap();
        assert_eq!(grid.len(), 2);
    }

    #[test]
    fn no_fast_buses() {
        let grid = make_star_grid(1, SpeedClass::Slow, StarParams::default())
            .unwrap()
            .map_buses(|b| b.speed_class = SpeedClass::Slow)
            .unwrap();
        let sys = at_zero(&grid);
        let red = ReducedSystem::from_linearized(&sys).unwrap();
        assert_eq!(red.noise_map.shape(), (2, 0));
        assert_eq!(red.sigma_xi, DMatrix::from_diagonal_element(2, 2, 1e-4));
    }

    #[test]
    fn silent_fast_buses_leave_diagonal_covariance() {
        let sys = at_zero(&path3([0.3, 0.0, 0.2]));
        let red = ReducedSystem::from_linearized(&sys).unwrap();
        assert_eq!(red.sigma_xi[(0, 1)], 0.0);
        assert!((red.sigma_xi[(0, 0)] - 0.09).abs() < 1e-16);
    }

    #[test]
    fn indefinite_fast_block_reports_eigenvalue() {
        let mut sys = at_zero(&path3([0.0; 3]));
        sys.j_ff[(0, 0)] = 0.5;
        match schur_reduce(&sys).unwrap_err() {
            Error::IndefiniteFastBlock { eigenvalue } => assert_eq!(eigenvalue, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let k = DMatrix::zeros(2, 1);
        let err = effective_noise_covariance(&k, &DVector::zeros(2), &DVector::zeros(2));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn json_round_trip() {
        let sys = at_zero(&path3([0.1, 0.2, 0.3]));
        let red = ReducedSystem::from_linearized(&sys).unwrap();
        let back = ReducedSystem::from_json(&red.to_json().unwrap()).unwrap();
        assert_eq!(red, back);
    }
}
