//! The commands behind the `kron-noise` binary.
//!
//! Every command writes its outputs atomically into `--out-dir` together
//! with a `<command>_manifest.json` that records the arguments, the resolved
//! configuration, seeds and input digests.

mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{parse_grid_json, parse_matpower_case, ClassDefaults, Grid, MatpowerDefaults, SpeedClass};
use crate::kron::{make_star_grid, ReducedSystem, StarParams};
use crate::scenarios;
use crate::sim::{ensemble_run, EnsembleStats, ModelKind, Scenario, SimConfig, Simulator};
use crate::spectral::{coi_variance, eigendecompose_reduced, gamma_from_noise_map, gamma_matrix, VarianceReport};

pub use output::{atomic_write, competition_ranks, InputDigest, RunManifest};

#[derive(Debug, Parser, Serialize)]
#[command(name = "kron-noise", version, about = "Kron reduction of noisy power-grid dynamics")]
pub struct Cli {
    /// Seed for sigma sampling and for the simulation ensembles.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Kron-reduce a grid and write the reduced system as JSON.
    Reduce {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
    },
    /// Closed-form COI frequency variances (homogeneous parameters only).
    Variance {
        #[command(flatten)]
        grid: GridArgs,
        /// Sort rows by ascending naive variance.
        #[arg(long)]
        order_by_naive: bool,
    },
    /// Simulate one model; writes a trajectory and ensemble statistics.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum)]
        model: CliModel,
        #[command(flatten)]
        sim: SimArgs,
        /// Keep every n-th recorded sample in the trajectory CSV.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
    },
    /// Analytic and simulated variances side by side, with rank changes.
    Compare {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "reduced-xi,reduced-naive,full-linear"
        )]
        models: Vec<CliModel>,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        order_by_naive: bool,
    },
    /// Gamma matrix and naive-vs-corrected variances on a star grid.
    StarDemo {
        #[arg(long, default_value_t = 8)]
        n_outer: usize,
        #[arg(long, value_enum, default_value_t = CliClass::Slow)]
        center: CliClass,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        #[arg(long, default_value_t = 0.2)]
        m: f64,
        #[arg(long, default_value_t = 0.05)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CliClass {
    Slow,
    Fast,
}

impl From<CliClass> for SpeedClass {
    fn from(c: CliClass) -> Self {
        match c {
            CliClass::Slow => SpeedClass::Slow,
            CliClass::Fast => SpeedClass::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliModel {
    FullNonlinear,
    FullLinear,
    ReducedXi,
    ReducedNaive,
}

impl From<CliModel> for ModelKind {
    fn from(m: CliModel) -> Self {
        match m {
            CliModel::FullNonlinear => ModelKind::FullNonlinear,
            CliModel::FullLinear => ModelKind::FullLinear,
            CliModel::ReducedXi => ModelKind::ReducedXi,
            CliModel::ReducedNaive => ModelKind::ReducedNaive,
        }
    }
}

/// Grid source and per-class overrides.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// `.json` grid, `.m` MATPOWER case, or `builtin:<name>` with name one of
    /// test5, star-loads, star-gens, ieee118.
    pub grid: String,
    #[arg(long, default_value_t = 0.2)]
    pub slow_m: f64,
    #[arg(long, default_value_t = 0.05)]
    pub slow_d: f64,
    #[arg(long, default_value_t = 0.002)]
    pub fast_m: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub fast_d: f64,
    /// Noise correlation time for MATPOWER buses.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// `uniform:lo:hi`, drawn per bus with `--seed`. Applied by default
    /// (uniform:0:0.01) to MATPOWER cases; JSON grids keep their own sigmas
    /// unless given.
    #[arg(long)]
    pub sigma_dist: Option<String>,
    /// Set every slow bus's sigma.
    #[arg(long)]
    pub sigma_slow: Option<f64>,
    /// Set every fast bus's sigma.
    #[arg(long)]
    pub sigma_fast: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    /// Timescale ratio of the fast buses in the full models.
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,
    /// Defaults to min(tau_min / 10, min eps m / d).
    #[arg(long)]
    pub dt_max: Option<f64>,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Defaults to 10 max(tau, m / d).
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub ensemble: usize,
    /// 0.5 trapezoidal, 1.0 backward Euler.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

fn parse_sigma_dist(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("--sigma-dist must look like uniform:lo:hi, got `{text}`"));
    let mut parts = text.split(':');
    if parts.next() != Some("uniform") {
        return Err(bad());
    }
    let lo: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let hi: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl GridArgs {
    fn defaults(&self) -> MatpowerDefaults {
        let class = |inertia, damping| ClassDefaults {
            inertia,
            damping,
            sigma: 0.0,
            tau: self.tau,
        };
        MatpowerDefaults {
            slow: class(self.slow_m, self.slow_d),
            fast: class(self.fast_m, self.fast_d),
        }
    }

    /// Loads the grid and applies the sigma options.
    fn load(&self, seed: u64) -> Result<(Grid, Vec<InputDigest>)> {
        let (grid, digests, sample_by_default) = if let Some(name) = self.grid.strip_prefix("builtin:") {
            let grid = match name {
                "test5" => scenarios::homogeneous_test_grid(),
                "star-loads" => scenarios::star_of_loads_in_ring(Default::default())?,
                "star-gens" => scenarios::star_of_generators_with_ring(Default::default())?,
                "ieee118" => scenarios::ieee118(&self.defaults())?,
                other => return Err(Error::Config(format!("unknown builtin grid `{other}`"))),
            };
            (grid, Vec::new(), name == "ieee118")
        } else {
            let path = Path::new(&self.grid);
            let wrap = |e: Error| Error::File {
                path: self.grid.clone(),
                source: Box::new(e),
            };
            let text = std::fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
            let digest = InputDigest::of(&self.grid, text.as_bytes());
            match path.extension().and_then(|e| e.to_str()) {
                Some("json") => (parse_grid_json(&text).map_err(wrap)?, vec![digest], false),
                Some("m") => {
                    let grid = parse_matpower_case(&text, &self.defaults()).map_err(wrap)?;
                    (grid.balanced(), vec![digest], true)
                }
                _ => {
                    return Err(wrap(Error::Config(
                        "unknown grid format; expected a .json or .m file".into(),
                    )))
                }
            }
        };
        let mut grid = grid;
        let dist = match (&self.sigma_dist, sample_by_default) {
            (Some(text), _) => Some(parse_sigma_dist(text)?),
            (None, true) => Some((0.0, 0.01)),
            (None, false) => None,
        };
        if let Some((lo, hi)) = dist {
            grid = grid.with_uniform_sigma(lo, hi, seed)?;
        }
        if self.sigma_slow.is_some() || self.sigma_fast.is_some() {
            grid = grid.map_buses(|b| {
                let value = match b.speed_class {
                    SpeedClass::Slow => self.sigma_slow,
                    SpeedClass::Fast => self.sigma_fast,
                };
                if let Some(v) = value {
                    b.noise_sigma = v;
                }
            })?;
        }
        Ok((grid, digests))
    }
}

impl SimArgs {
    fn config(&self, model: ModelKind, scenario: &Scenario, seed: u64) -> Result<SimConfig> {
        let sys = scenario.linearized(self.epsilon)?;
        let dt_max = self.dt_max.unwrap_or_else(|| {
            let eps = if model.is_full() { self.epsilon } else { 1.0 };
            SimConfig::default_dt_max(&sys, eps)
        });
        let burn_in = self.burn_in.unwrap_or_else(|| SimConfig::default_burn_in(&sys));
        let mut cfg = SimConfig::new(model, dt_max, self.t_end, burn_in);
        cfg.ensemble_size = self.ensemble;
        cfg.base_seed = seed;
        cfg.epsilon = self.epsilon;
        cfg.theta = self.theta;
        cfg.record_every = self.record_every;
        cfg.validate()?;
        Ok(cfg)
    }

    /// One step size shared by all models so that runs with the same seed
    /// see the same noise samples.
    fn shared_config(&self, models: &[ModelKind], scenario: &Scenario, seed: u64) -> Result<Vec<SimConfig>> {
        let mut cfgs = models
            .iter()
            .map(|&m| self.config(m, scenario, seed))
            .collect::<Result<Vec<_>>>()?;
        let dt = cfgs.iter().map(|c| c.dt_max).fold(f64::INFINITY, f64::min);
        cfgs.iter_mut().for_each(|c| c.dt_max = dt);
        Ok(cfgs)
    }
}

/// What a command produced, for the manifest.
struct Outcome {
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

/// Runs a parsed command line. `argv` is echoed into the manifest.
pub fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::File {
        path: cli.out_dir.display().to_string(),
        source: Box::new(e.into()),
    })?;
    let (name, outcome) = match &cli.command {
        Command::Reduce { grid, epsilon } => ("reduce", cmd_reduce(cli, grid, *epsilon)?),
        Command::Variance {
            grid,
            order_by_naive,
        } => ("variance", cmd_variance(cli, grid, *order_by_naive)?),
        Command::Simulate {
            grid,
            model,
            sim,
            decimate,
        } => ("simulate", cmd_simulate(cli, grid, (*model).into(), sim, *decimate)?),
        Command::Compare {
            grid,
            models,
            sim,
            order_by_naive,
        } => {
            let models: Vec<ModelKind> = models.iter().map(|&m| m.into()).collect();
            ("compare", cmd_compare(cli, grid, &models, sim, *order_by_naive)?)
        }
        Command::StarDemo {
            n_outer,
            center,
            sigma,
            tau,
            m,
            d,
            coupling,
        } => {
            let params = StarParams {
                coupling: *coupling,
                sigma: *sigma,
                inertia: *m,
                damping: *d,
                tau: *tau,
            };
            ("star-demo", cmd_star_demo(cli, *n_outer, (*center).into(), params)?)
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        args: argv.to_vec(),
        cli: serde_json::to_value(cli)?,
        config: outcome.config,
        seed: cli.seed,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    let path = cli.out_dir.join(format!("{}_manifest.json", name.replace('-', "_")));
    atomic_write(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}

fn write_file(cli: &Cli, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    atomic_write(&cli.out_dir.join(name), bytes)?;
    outputs.push(name.to_string());
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn cmd_reduce(cli: &Cli, args: &GridArgs, epsilon: f64) -> Result<Outcome> {
    let (grid, inputs) = args.load(cli.seed)?;
    let scenario = Scenario::new(grid)?;
    scenario.linearized(epsilon)?;
    let red = scenario.reduced()?;
    let mut outputs = Vec::new();
    write_file(cli, "reduced.json", red.to_json()?.as_bytes(), &mut outputs)?;

    println!("N_S = {}", red.n_slow());
    println!("N_F = {}", red.n_fast());
    if red.n_slow() > 1 {
        let basis = eigendecompose_reduced(&red.j_red)?;
        println!("spectral gap = {}", -basis.lambdas[1]);
    }
    let row_sums: Vec<String> = red
        .noise_map
        .row_iter()
        .zip(&red.slow_ids)
        .map(|(r, id)| format!("{id}:{}", r.sum()))
        .collect();
    println!("K row sums = [{}]", row_sums.join(", "));
    if scenario.op.angle_window_violated {
        eprintln!("warning: some line angle difference is at least pi/2");
    }
    Ok(Outcome {
        config: json!({ "epsilon": epsilon, "grid": args }),
        inputs,
        outputs,
    })
}

fn analytic_report(red: &ReducedSystem) -> Result<VarianceReport> {
    let basis = eigendecompose_reduced(&red.j_red)?;
    let gamma = gamma_from_noise_map(red, &basis);
    coi_variance(red, &basis, &gamma)
}

fn cmd_variance(cli: &Cli, args: &GridArgs, order_by_naive: bool) -> Result<Outcome> {
    let (grid, inputs) = args.load(cli.seed)?;
    let red = Scenario::new(grid)?.reduced()?;
    let report = analytic_report(&red)?;
    let mut outputs = Vec::new();
    let bytes = csv_bytes(|b| report.write_csv(b, order_by_naive))?;
    write_file(cli, "variance.csv", &bytes, &mut outputs)?;
    let plot = output::plot_spec(
        "COI frequency variance per slow bus",
        "variance.csv",
        &[("corrected", "var_total", "dashed"), ("naive", "var_naive", "dashed")],
    );
    write_file(cli, "variance_plot.json", serde_json::to_string_pretty(&plot)?.as_bytes(), &mut outputs)?;
    Ok(Outcome {
        config: json!({ "grid": args, "order_by_naive": order_by_naive, "params": report.params }),
        inputs,
        outputs,
    })
}

fn cmd_simulate(
    cli: &Cli,
    args: &GridArgs,
    model: ModelKind,
    sim: &SimArgs,
    decimate: usize,
) -> Result<Outcome> {
    let (grid, inputs) = args.load(cli.seed)?;
    let scenario = Scenario::new(grid)?;
    let cfg = sim.config(model, &scenario, cli.seed)?;
    let simulator = Simulator::new(&scenario, &cfg)?;
    let stats = ensemble_run(&simulator, &cfg)?;
    let first = simulator.simulate(cfg.base_seed).map_err(|e| Error::Trajectory {
        index: 0,
        source: Box::new(e),
    })?;
    let mut outputs = Vec::new();
    let bytes = csv_bytes(|b| first.write_csv(b, decimate))?;
    write_file(cli, "trajectory.csv", &bytes, &mut outputs)?;
    let bytes = csv_bytes(|b| stats.write_csv(b))?;
    write_file(cli, "ensemble.csv", &bytes, &mut outputs)?;
    Ok(Outcome {
        config: json!({ "grid": args, "sim": cfg, "decimate": decimate }),
        inputs,
        outputs,
    })
}

fn cmd_compare(
    cli: &Cli,
    args: &GridArgs,
    models: &[ModelKind],
    sim: &SimArgs,
    order_by_naive: bool,
) -> Result<Outcome> {
    let (grid, inputs) = args.load(cli.seed)?;
    let scenario = Scenario::new(grid)?;
    let red = scenario.reduced()?;
    let analytic = match analytic_report(&red) {
        Ok(r) => Some(r),
        Err(Error::Heterogeneous(_)) => None,
        Err(e) => return Err(e),
    };
    let cfgs = sim.shared_config(models, &scenario, cli.seed)?;
    let mut empirical: Vec<(ModelKind, EnsembleStats)> = Vec::new();
    for cfg in &cfgs {
        let simulator = Simulator::new(&scenario, cfg)?;
        empirical.push((cfg.model, ensemble_run(&simulator, cfg)?));
    }
    let table = output::CompareTable::build(&red.slow_ids, analytic.as_ref(), &empirical);
    let mut outputs = Vec::new();
    let bytes = csv_bytes(|b| table.write_csv(b, order_by_naive))?;
    write_file(cli, "compare.csv", &bytes, &mut outputs)?;
    let mut series: Vec<(String, String, &str)> = Vec::new();
    if analytic.is_some() {
        series.push(("analytic corrected".into(), "var_analytic".into(), "dashed"));
        series.push(("analytic naive".into(), "var_naive_analytic".into(), "dashed"));
    }
    for (model, _) in &empirical {
        series.push((model.name().into(), format!("var_{}", model.name()), "solid"));
    }
    let series_ref: Vec<(&str, &str, &str)> =
        series.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), *c)).collect();
    let plot = output::plot_spec("Analytic vs simulated COI frequency variance", "compare.csv", &series_ref);
    write_file(cli, "compare_plot.json", serde_json::to_string_pretty(&plot)?.as_bytes(), &mut outputs)?;
    let changed = table.rank_change.iter().flatten().filter(|&&c| c != 0).count();
    println!("buses with a rank change: {changed} of {}", red.n_slow());
    Ok(Outcome {
        config: json!({ "grid": args, "sims": cfgs, "analytic": analytic.is_some() }),
        inputs,
        outputs,
    })
}

fn cmd_star_demo(cli: &Cli, n_outer: usize, center: SpeedClass, params: StarParams) -> Result<Outcome> {
    if n_outer < 2 {
        return Err(Error::Config(format!("star-demo needs n_outer >= 2, got {n_outer}")));
    }
    let scenario = Scenario::new(make_star_grid(n_outer, center, params)?)?;
    let sys = scenario.linearized(1.0)?;
    let red = ReducedSystem::from_linearized(&sys)?;
    let basis = eigendecompose_reduced(&red.j_red)?;
    let gamma = gamma_matrix(&sys, &basis, &sys.sigma_fast)?;
    let n = red.n_slow();
    let uniform = gamma[(0, 0)];
    let mut max_modes = 0.0f64;
    for a in 1..n {
        for b in 1..n {
            max_modes = max_modes.max(gamma[(a, b)].abs());
        }
    }
    let prediction = match center {
        SpeedClass::Slow => params.sigma * params.sigma * red.n_fast() as f64,
        SpeedClass::Fast => 0.0,
    };
    let report = coi_variance(&red, &basis, &gamma)?;

    println!("star with {n_outer} outer buses, center {center:?}");
    println!("N_S = {n}, N_F = {}", red.n_fast());
    println!("Gamma uniform mode = {uniform:e}");
    println!("max |Gamma_ab| over a, b >= 2 = {max_modes:e}");
    match center {
        SpeedClass::Slow => println!("closed form sigma^2 N_F = {prediction:e}"),
        SpeedClass::Fast => println!("closed form for a, b >= 2: 0"),
    }
    println!("bus_id, var_xi, var_naive");
    for (k, id) in report.bus_ids.iter().enumerate() {
        println!("{id}, {:e}, {:e}", report.var_total[k], report.var_naive()[k]);
    }

    let mut outputs = Vec::new();
    let bytes = csv_bytes(|b| report.write_csv(b, false))?;
    write_file(cli, "star_demo.csv", &bytes, &mut outputs)?;
    let summary = json!({
        "n_outer": n_outer,
        "center": center,
        "n_slow": n,
        "n_fast": red.n_fast(),
        "gamma_uniform_mode": uniform,
        "gamma_max_nonuniform": max_modes,
        "closed_form": prediction,
    });
    write_file(cli, "star_demo.json", serde_json::to_string_pretty(&summary)?.as_bytes(), &mut outputs)?;
    Ok(Outcome {
        config: json!({
            "n_outer": n_outer,
            "center": center,
            "coupling": params.coupling,
            "sigma": params.sigma,
            "m": params.inertia,
            "d": params.damping,
            "tau": params.tau,
        }),
        inputs: Vec::new(),
        outputs,
    })
}
