use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::integrate::Simulator;
use super::{SimConfig, Trajectory};
use crate::error::{Error, Result};

const N_BATCHES: usize = 16;

/// Per-bus COI frequency statistics pooled over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub bus_ids: Vec<u32>,
    /// Mean of `x'_i - mean_k x'_k`.
    pub mean: Vec<f64>,
    /// Mean of `(x'_i - mean_k x'_k)^2`.
    pub var_coi: Vec<f64>,
    /// Batch-means standard error of `var_coi`.
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl EnsembleStats {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bus_id", "var_coi", "stderr", "n_samples"])?;
        for (k, id) in self.bus_ids.iter().enumerate() {
            w.write_record([
                id.to_string(),
                self.var_coi[k].to_string(),
                self.stderr[k].to_string(),
                self.n_samples.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sums from one trajectory's measurement window.
#[derive(Debug, Clone)]
struct Partial {
    bus_ids: Vec<u32>,
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    /// Per batch, per bus mean of squares.
    batches: Vec<Vec<f64>>,
}

fn partial(traj: &Trajectory, burn_in: f64) -> Partial {
    let n = traj.bus_ids.len();
    let start = traj.times.partition_point(|&t| t < burn_in);
    let count = traj.len() - start;
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let n_batches = N_BATCHES.min(count);
    let mut batches = vec![vec![0.0; n]; n_batches];
    let mut batch_len = vec![0usize; n_batches];
    let mut dev = vec![0.0; n];
    for (k, row) in (start..traj.len()).enumerate() {
        let r = traj.xdot.row(row);
        let mean = r.sum() / n as f64;
        let batch = k * n_batches / count;
        batch_len[batch] += 1;
        for i in 0..n {
            dev[i] = r[i] - mean;
            sum[i] += dev[i];
            sum_sq[i] += dev[i] * dev[i];
            batches[batch][i] += dev[i] * dev[i];
        }
    }
    for (b, len) in batches.iter_mut().zip(batch_len) {
        b.iter_mut().for_each(|v| *v /= len as f64);
    }
    Partial {
        bus_ids: traj.bus_ids.clone(),
        count,
        sum,
        sum_sq,
        batches,
    }
}

fn merge(parts: &[Partial]) -> Result<EnsembleStats> {
    let first = parts.first().ok_or(Error::EmptyWindow)?;
    if parts.iter().any(|p| p.bus_ids != first.bus_ids) {
        return Err(Error::DimensionMismatch(
            "trajectories have different bus orderings".into(),
        ));
    }
    let count: usize = parts.iter().map(|p| p.count).sum();
    if count == 0 {
        return Err(Error::EmptyWindow);
    }
    let n = first.bus_ids.len();
    let total = |f: fn(&Partial) -> &Vec<f64>, i: usize| parts.iter().map(|p| f(p)[i]).sum::<f64>();
    let mean: Vec<f64> = (0..n).map(|i| total(|p| &p.sum, i) / count as f64).collect();
    let var_coi: Vec<f64> = (0..n).map(|i| total(|p| &p.sum_sq, i) / count as f64).collect();
    let batches: Vec<&Vec<f64>> = parts.iter().flat_map(|p| p.batches.iter()).collect();
    let nb = batches.len() as f64;
    let stderr = (0..n)
        .map(|i| {
            if batches.len() < 2 {
                return f64::NAN;
            }
            let m = batches.iter().map(|b| b[i]).sum::<f64>() / nb;
            let ss = batches.iter().map(|b| (b[i] - m).powi(2)).sum::<f64>();
            (ss / (nb - 1.0) / nb).sqrt()
        })
        .collect();
    Ok(EnsembleStats {
        bus_ids: first.bus_ids.clone(),
        mean,
        var_coi,
        stderr,
        n_samples: count,
    })
}

/// Pools the COI-projected squared frequencies of all samples at
/// `t >= burn_in`. Each trajectory is cut into 16 batches for the standard
/// error.
pub fn coi_frequency_variance_estimate(trajs: &[Trajectory], burn_in: f64) -> Result<EnsembleStats> {
    let parts: Vec<Partial> = trajs.iter().map(|t| partial(t, burn_in)).collect();
    merge(&parts)
}

/// Anything that can produce one trajectory per seed.
pub trait TrajectoryModel: Sync {
    fn simulate(&self, seed: u64) -> Result<Trajectory>;
}

impl TrajectoryModel for Simulator<'_> {
    fn simulate(&self, seed: u64) -> Result<Trajectory> {
        Simulator::simulate(self, seed)
    }
}

/// Runs `cfg.ensemble_size` trajectories in parallel, trajectory `k` seeded
/// with `base_seed ^ k`. The result does not depend on scheduling.
pub fn ensemble_run<M: TrajectoryModel + ?Sized>(model: &M, cfg: &SimConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let parts: Vec<Result<Partial>> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|k| {
            model
                .simulate(cfg.base_seed ^ k as u64)
                .map(|traj| partial(&traj, cfg.burn_in))
                .map_err(|e| Error::Trajectory {
                    index: k,
                    source: Box::new(e),
                })
        })
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    merge(&parts)
}
