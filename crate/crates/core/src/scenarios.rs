//! Ready-made grids used by the examples, the CLI and the test suites.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{parse_matpower_case, Bus, Grid, Line, MatpowerDefaults, SpeedClass};

/// The IEEE 118-bus case in MATPOWER format.
pub const IEEE118_CASE: &str = include_str!("../data/case118.m");

fn bus(id: u32, class: SpeedClass, m: f64, d: f64, p: f64, sigma: f64, tau: f64) -> Bus {
    Bus {
        id,
        speed_class: class,
        inertia: m,
        damping: d,
        injection: p,
        noise_sigma: sigma,
        noise_tau: tau,
        voltage: 1.0,
    }
}

fn line(from: u32, to: u32, b: f64) -> Line {
    Line {
        from,
        to,
        susceptance: b,
    }
}

/// Five slow buses on a ring, five fast buses each bridging two neighbors.
/// All buses share `m = 0.2`, `d = 0.1`, `tau = 0.1`; small balanced
/// injections give a nonzero fixed point.
pub fn homogeneous_test_grid() -> Grid {
    let (m, d, tau) = (0.2, 0.1, 0.1);
    let sigma_slow = [0.004, 0.01, 0.002, 0.007, 0.005];
    let sigma_fast = [0.01, 0.003, 0.008, 0.01, 0.006];
    let p_slow = [0.2, 0.1, 0.15, 0.05, 0.1];
    let p_fast = [-0.15, -0.1, -0.2, -0.05, -0.1];
    let mut buses = Vec::new();
    for k in 0..5 {
        buses.push(bus(k + 1, SpeedClass::Slow, m, d, p_slow[k as usize], sigma_slow[k as usize], tau));
    }
    for k in 0..5 {
        buses.push(bus(k + 6, SpeedClass::Fast, m, d, p_fast[k as usize], sigma_fast[k as usize], tau));
    }
    let ring_b = [1.0, 1.5, 0.8, 1.2, 1.0];
    let mut lines = Vec::new();
    for k in 0..5u32 {
        lines.push(line(k + 1, (k + 1) % 5 + 1, ring_b[k as usize]));
        lines.push(line(k + 6, k + 1, 2.0));
        lines.push(line(k + 6, (k + 1) % 5 + 1, 1.0 + 0.25 * k as f64));
    }
    Grid::new(buses, lines, None).expect("static test grid is valid")
}

/// Parameters for the two embedded star topologies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedStar {
    pub n_ring: usize,
    pub n_star: usize,
    pub sigma: f64,
    pub m: f64,
    pub d: f64,
    pub tau: f64,
}

impl Default for EmbeddedStar {
    fn default() -> Self {
        EmbeddedStar {
            n_ring: 6,
            n_star: 8,
            sigma: 0.01,
            m: 0.2,
            d: 0.1,
            tau: 0.1,
        }
    }
}

/// A ring of slow buses `1..=n_ring`; bus 1 is the center of a star of
/// `n_star` fast leaves. Zero injections, unit couplings.
pub fn star_of_loads_in_ring(p: EmbeddedStar) -> Result<Grid> {
    let n_ring = p.n_ring as u32;
    let mut buses: Vec<Bus> = (1..=n_ring)
        .map(|id| bus(id, SpeedClass::Slow, p.m, p.d, 0.0, p.sigma, p.tau))
        .collect();
    let mut lines: Vec<Line> = (1..=n_ring)
        .filter(|&k| n_ring > 2 || k < n_ring)
        .map(|k| line(k, k % n_ring + 1, 1.0))
        .collect();
    for k in 0..p.n_star as u32 {
        let id = n_ring + 1 + k;
        buses.push(bus(id, SpeedClass::Fast, p.m, p.d, 0.0, p.sigma, p.tau));
        lines.push(line(1, id, 1.0));
    }
    Grid::new(buses, lines, None)
}

/// A fast center (bus 1) with `n_star` slow generators around it, the
/// generators also joined in a ring. Zero injections, unit couplings.
pub fn star_of_generators_with_ring(p: EmbeddedStar) -> Result<Grid> {
    let n = p.n_star as u32;
    let mut buses = vec![bus(1, SpeedClass::Fast, p.m, p.d, 0.0, p.sigma, p.tau)];
    let mut lines = Vec::new();
    for k in 0..n {
        buses.push(bus(k + 2, SpeedClass::Slow, p.m, p.d, 0.0, p.sigma, p.tau));
        lines.push(line(1, k + 2, 1.0));
        if n > 2 || k + 1 < n {
            lines.push(line(k + 2, (k + 1) % n + 2, 1.0));
        }
    }
    Grid::new(buses, lines, None)
}

/// Settings for [`random_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGridSpec {
    pub n_slow: usize,
    pub n_fast: usize,
    /// Extra edges beyond a spanning tree, as a fraction of `n`.
    pub extra_edges: f64,
    pub slow_m: f64,
    pub slow_d: f64,
    pub tau_slow: f64,
    pub tau_fast: f64,
    /// Draw fast `m`, `d` per bus instead of reusing the slow values.
    pub heterogeneous_fast: bool,
    pub max_injection: f64,
    pub max_sigma: f64,
}

impl Default for RandomGridSpec {
    fn default() -> Self {
        RandomGridSpec {
            n_slow: 4,
            n_fast: 4,
            extra_edges: 0.5,
            slow_m: 0.2,
            slow_d: 0.1,
            tau_slow: 0.1,
            tau_fast: 0.1,
            heterogeneous_fast: true,
            max_injection: 0.1,
            max_sigma: 0.01,
        }
    }
}

/// Random connected grid: random spanning tree plus extra edges, couplings
/// in `[0.5, 1.5]`, balanced injections, random slow/fast labelling.
pub fn random_grid(spec: &RandomGridSpec, seed: u64) -> Result<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_slow + spec.n_fast;
    let mut classes: Vec<SpeedClass> = (0..n)
        .map(|k| if k < spec.n_slow { SpeedClass::Slow } else { SpeedClass::Fast })
        .collect();
    classes.shuffle(&mut rng);

    let mut buses = Vec::with_capacity(n);
    for (k, &class) in classes.iter().enumerate() {
        let (m, d, tau) = match class {
            SpeedClass::Slow => (spec.slow_m, spec.slow_d, spec.tau_slow),
            SpeedClass::Fast if spec.heterogeneous_fast => (
                rng.random_range(0.05..0.5),
                rng.random_range(0.02..0.3),
                spec.tau_fast,
            ),
            SpeedClass::Fast => (spec.slow_m, spec.slow_d, spec.tau_fast),
        };
        let p = if spec.max_injection > 0.0 {
            rng.random_range(-spec.max_injection..spec.max_injection)
        } else {
            0.0
        };
        let sigma = if spec.max_sigma > 0.0 {
            rng.random_range(0.0..spec.max_sigma)
        } else {
            0.0
        };
        buses.push(bus(k as u32 + 1, class, m, d, p, sigma, tau));
    }

    let mut pairs = std::collections::BTreeSet::new();
    let mut lines = Vec::new();
    let mut push = |a: u32, b: u32, rng: &mut ChaCha8Rng, lines: &mut Vec<Line>| {
        let key = (a.min(b), a.max(b));
        if a != b && pairs.insert(key) {
            lines.push(line(a, b, rng.random_range(0.5..1.5)));
        }
    };
    for k in 1..n {
        let parent = rng.random_range(0..k);
        push(k as u32 + 1, parent as u32 + 1, &mut rng, &mut lines);
    }
    let extra = (spec.extra_edges * n as f64).round() as usize;
    for _ in 0..extra {
        let a = rng.random_range(0..n) as u32 + 1;
        let b = rng.random_range(0..n) as u32 + 1;
        push(a, b, &mut rng, &mut lines);
    }
    Ok(Grid::new(buses, lines, None)?.balanced())
}

/// The IEEE 118-bus case with the given class defaults, injections
/// rebalanced over the generator buses.
pub fn ieee118(defaults: &MatpowerDefaults) -> Result<Grid> {
    Ok(parse_matpower_case(IEEE118_CASE, defaults)?.balanced())
}

/// Scales every bus's `m` and `d` by independent factors in `[lo, hi]`.
pub fn heterogeneous(grid: &Grid, lo: f64, hi: f64, seed: u64) -> Result<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.map_buses(|b| {
        b.inertia *= rng.random_range(lo..=hi);
        b.damping *= rng.random_range(lo..=hi);
    })
}
