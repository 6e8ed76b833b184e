use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent OU channels with `<eta_i(t) eta_i(t')> = sigma_i^2 exp(-|t-t'|/tau_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuSpec {
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub seed: u64,
}

impl OuSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.len() != self.tau.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sigmas for {} correlation times",
                self.sigma.len(),
                self.tau.len()
            )));
        }
        for (k, (&s, &t)) in self.sigma.iter().zip(&self.tau).enumerate() {
            if !(s >= 0.0) || !(t > 0.0) {
                return Err(Error::Config(format!(
                    "OU channel {k}: need sigma >= 0 and tau > 0, got ({s}, {t})"
                )));
            }
        }
        Ok(())
    }
}

/// A per-step forcing vector, held constant over each step.
pub trait NoiseSource {
    fn dim(&self) -> usize;
    /// Writes the value for the current step into `out` and advances.
    fn next_into(&mut self, out: &mut DVector<f64>);
}

/// Exact discretization of the OU process on a uniform grid:
/// `eta_{k+1} = a eta_k + sigma sqrt(1 - a^2) z_k`, `a = exp(-dt/tau)`,
/// started from the stationary law.
#[derive(Debug, Clone)]
pub struct OuNoise {
    state: DVector<f64>,
    decay: DVector<f64>,
    kick: DVector<f64>,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(spec: &OuSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.sigma.len();
        let decay = DVector::from_iterator(n, spec.tau.iter().map(|t| (-dt / t).exp()));
        let kick = DVector::from_iterator(
            n,
            spec.sigma
                .iter()
                .zip(spec.tau.iter())
                .map(|(s, t)| s * (-(-2.0 * dt / t).exp_m1()).sqrt()),
        );
        let state = DVector::from_iterator(
            n,
            spec.sigma.iter().map(|s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            }),
        );
        Ok(OuNoise {
            state,
            decay,
            kick,
            rng,
        })
    }
}

impl NoiseSource for OuNoise {
    fn dim(&self) -> usize {
        self.state.len()
    }

    fn next_into(&mut self, out: &mut DVector<f64>) {
        out.copy_from(&self.state);
        for k in 0..self.state.len() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.state[k] = self.decay[k] * self.state[k] + self.kick[k] * z;
        }
    }
}

/// Samples `n_steps` values of every channel; row `k` is time `k dt`.
pub fn ou_sample_path(spec: &OuSpec, dt: f64, n_steps: usize) -> Result<DMatrix<f64>> {
    let mut noise = OuNoise::new(spec, dt)?;
    let n = noise.dim();
    let mut path = DMatrix::zeros(n_steps, n);
    let mut buf = DVector::zeros(n);
    for k in 0..n_steps {
        noise.next_into(&mut buf);
        path.set_row(k, &buf.transpose());
    }
    Ok(path)
}

/// Replays a recorded path (rows are steps), then holds zero.
#[derive(Debug, Clone)]
pub struct PathNoise {
    path: DMatrix<f64>,
    step: usize,
}

impl PathNoise {
    pub fn new(path: DMatrix<f64>) -> Self {
        PathNoise { path, step: 0 }
    }
}

impl NoiseSource for PathNoise {
    fn dim(&self) -> usize {
        self.path.ncols()
    }

    fn next_into(&mut self, out: &mut DVector<f64>) {
        if self.step < self.path.nrows() {
            out.copy_from(&self.path.row(self.step).transpose());
        } else {
            out.fill(0.0);
        }
        self.step += 1;
    }
}

/// Deterministic forcing `f(t)` sampled at the left end of each step.
pub struct DeterministicForcing<F> {
    dim: usize,
    dt: f64,
    step: usize,
    f: F,
}

impl<F: FnMut(f64, &mut DVector<f64>)> DeterministicForcing<F> {
    pub fn new(dim: usize, dt: f64, f: F) -> Self {
        DeterministicForcing { dim, dt, step: 0, f }
    }
}

impl<F: FnMut(f64, &mut DVector<f64>)> NoiseSource for DeterministicForcing<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_into(&mut self, out: &mut DVector<f64>) {
        (self.f)(self.step as f64 * self.dt, out);
        self.step += 1;
    }
}
