//! Grid description: buses, lines, and the JSON input format.
//!
//! A [`Grid`] is always validated: positive dynamic parameters, no
//! self-loops or parallel lines, connected, at least one slow bus.

mod fixed_point;
mod linear;
mod matpower;

pub use fixed_point::{power_residual, solve_fixed_point, OperatingPoint};
pub use linear::{assemble_linearized, build_jacobian, LinearizedSystem};
pub use matpower::{parse_matpower_case, ClassDefaults, MatpowerDefaults};

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    Slow,
    Fast,
}

impl SpeedClass {
    pub fn opposite(self) -> Self {
        match self {
            SpeedClass::Slow => SpeedClass::Fast,
            SpeedClass::Fast => SpeedClass::Slow,
        }
    }
}

fn default_voltage() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    #[serde(rename = "class")]
    pub speed_class: SpeedClass,
    #[serde(rename = "m")]
    pub inertia: f64,
    #[serde(rename = "d")]
    pub damping: f64,
    #[serde(rename = "p")]
    pub injection: f64,
    #[serde(rename = "sigma")]
    pub noise_sigma: f64,
    #[serde(rename = "tau")]
    pub noise_tau: f64,
    #[serde(rename = "v", default = "default_voltage")]
    pub voltage: f64,
}

impl Bus {
    fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 5] = [
            ("m", self.inertia, self.inertia > 0.0, "positive"),
            ("d", self.damping, self.damping > 0.0, "positive"),
            ("tau", self.noise_tau, self.noise_tau > 0.0, "positive"),
            ("sigma", self.noise_sigma, self.noise_sigma >= 0.0, "nonnegative"),
            ("v", self.voltage, self.voltage > 0.0, "positive"),
        ];
        for (field, value, ok, requirement) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    id: self.id,
                    field,
                    requirement,
                    value,
                });
            }
        }
        if !self.injection.is_finite() {
            return Err(Error::InvalidParameter {
                id: self.id,
                field: "p",
                requirement: "finite",
                value: self.injection,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    #[serde(rename = "B")]
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridData {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_power: Option<f64>,
}

/// A validated power grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridData", into = "GridData")]
pub struct Grid {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    base_power: Option<f64>,
    index: HashMap<u32, usize>,
}

impl TryFrom<GridData> for Grid {
    type Error = Error;

    fn try_from(data: GridData) -> Result<Self> {
        Grid::new(data.buses, data.lines, data.base_power)
    }
}

impl From<Grid> for GridData {
    fn from(grid: Grid) -> Self {
        GridData {
            buses: grid.buses,
            lines: grid.lines,
            base_power: grid.base_power,
        }
    }
}

impl Grid {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, base_power: Option<f64>) -> Result<Self> {
        let mut index = HashMap::with_capacity(buses.len());
        for (k, bus) in buses.iter().enumerate() {
            bus.validate()?;
            if index.insert(bus.id, k).is_some() {
                return Err(Error::DuplicateBus(bus.id));
            }
        }
        let mut seen = HashSet::with_capacity(lines.len());
        for line in &lines {
            if line.from == line.to {
                return Err(Error::SelfLoop {
                    from: line.from,
                    to: line.to,
                });
            }
            for id in [line.from, line.to] {
                if !index.contains_key(&id) {
                    return Err(Error::UnknownBus(id));
                }
            }
            if !(line.susceptance > 0.0) || !line.susceptance.is_finite() {
                return Err(Error::NonPositiveSusceptance {
                    from: line.from,
                    to: line.to,
                    value: line.susceptance,
                });
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !seen.insert(key) {
                return Err(Error::DuplicateLine {
                    from: key.0,
                    to: key.1,
                });
            }
        }
        if !buses.iter().any(|b| b.speed_class == SpeedClass::Slow) {
            return Err(Error::EmptySlowSet);
        }
        let grid = Grid {
            buses,
            lines,
            base_power,
            index,
        };
        let components = grid.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(grid)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn base_power(&self) -> Option<f64> {
        self.base_power
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Position of a bus id in [`Grid::buses`].
    pub fn position(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.position(id).map(|k| &self.buses[k])
    }

    /// Positions of the slow buses, in listing order.
    pub fn slow_positions(&self) -> Vec<usize> {
        self.class_positions(SpeedClass::Slow)
    }

    pub fn fast_positions(&self) -> Vec<usize> {
        self.class_positions(SpeedClass::Fast)
    }

    fn class_positions(&self, class: SpeedClass) -> Vec<usize> {
        (0..self.buses.len())
            .filter(|&k| self.buses[k].speed_class == class)
            .collect()
    }

    pub fn slow_ids(&self) -> Vec<u32> {
        self.slow_positions().into_iter().map(|k| self.buses[k].id).collect()
    }

    pub fn fast_ids(&self) -> Vec<u32> {
        self.fast_positions().into_iter().map(|k| self.buses[k].id).collect()
    }

    /// Effective couplings `b_ij = B_ij |V_i| |V_j|` as `(pos_i, pos_j, b_ij)`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.lines.iter().map(move |line| {
            let i = self.index[&line.from];
            let j = self.index[&line.to];
            let b = line.susceptance * self.buses[i].voltage * self.buses[j].voltage;
            (i, j, b)
        })
    }

    fn component_count(&self) -> usize {
        let n = self.buses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut k: usize) -> usize {
            while parent[k] != k {
                parent[k] = parent[parent[k]];
                k = parent[k];
            }
            k
        }
        let mut components = n;
        for (i, j, _) in self.couplings() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                components -= 1;
            }
        }
        components
    }

    pub fn injection_sum(&self) -> f64 {
        self.buses.iter().map(|b| b.injection).sum()
    }

    /// Spreads the injection mismatch evenly over the slow buses so that
    /// the injections sum to zero.
    pub fn balanced(&self) -> Grid {
        let slow = self.slow_positions();
        let share = self.injection_sum() / slow.len() as f64;
        let mut grid = self.clone();
        for k in slow {
            grid.buses[k].injection -= share;
        }
        grid
    }

    /// Assigns `sigma ~ U[lo, hi]` independently to every bus, in listing order.
    pub fn with_uniform_sigma(&self, lo: f64, hi: f64, seed: u64) -> Result<Grid> {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::Config(format!("invalid sigma range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grid = self.clone();
        for bus in &mut grid.buses {
            bus.noise_sigma = if hi > lo { rng.random_range(lo..hi) } else { lo };
        }
        Ok(grid)
    }

    /// Applies `f` to every bus and revalidates.
    pub fn map_buses(&self, mut f: impl FnMut(&mut Bus)) -> Result<Grid> {
        let mut buses = self.buses.clone();
        buses.iter_mut().for_each(&mut f);
        Grid::new(buses, self.lines.clone(), self.base_power)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a grid from its JSON description.
pub fn parse_grid_json(text: &str) -> Result<Grid> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let data: GridData = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Grid::try_from(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus(lines: &str) -> String {
        format!(
            r#"{{"buses":[
                {{"id":1,"class":"slow","m":0.2,"d":0.05,"p":0.5,"sigma":0.01,"tau":0.1}},
                {{"id":2,"class":"fast","m":0.002,"d":0.0005,"p":-0.5,"sigma":0.01,"tau":0.1,"v":1.0}}
            ], "lines":[{lines}]}}"#
        )
    }

    #[test]
    fn parses_minimal_grid() {
        let grid = parse_grid_json(&two_bus(r#"{"from":1,"to":2,"B":1.0}"#)).unwrap();
        assert_eq!(grid.slow_ids(), vec![1]);
        assert_eq!(grid.fast_ids(), vec![2]);
        assert_eq!(grid.bus(1).unwrap().voltage, 1.0);
    }

    #[test]
    fn rejects_self_loop() {
        let err = parse_grid_json(&two_bus(r#"{"from":1,"to":1,"B":1.0}"#)).unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
    }

    #[test]
    fn rejects_disconnected() {
        let text = r#"{"buses":[
            {"id":1,"class":"slow","m":0.2,"d":0.05,"p":0,"sigma":0,"tau":0.1},
            {"id":2,"class":"fast","m":0.2,"d":0.05,"p":0,"sigma":0,"tau":0.1},
            {"id":3,"class":"fast","m":0.2,"d":0.05,"p":0,"sigma":0,"tau":0.1}
        ], "lines":[{"from":1,"to":2,"B":1.0}]}"#;
        let err = parse_grid_json(text).unwrap_err();
        assert!(err.to_string().contains("graph not connected"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_path() {
        let text = two_bus(r#"{"from":1,"to":2,"B":1.0,"x":3}"#);
        match parse_grid_json(&text).unwrap_err() {
            Error::Schema { path, message } => {
                assert_eq!(path, "lines[0].x");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = two_bus(r#"{"from":1,"to":2,"B":"one"}"#);
        match parse_grid_json(&text).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "lines[0].B"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let text = two_bus(r#"{"from":1,"to":2,"B":1.0}"#).replace("\"m\":0.2", "\"m\":0.0");
        let err = parse_grid_json(&text).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { id: 1, field: "m", .. }));
        let text = two_bus(r#"{"from":1,"to":2,"B":1.0}"#).replace("\"tau\":0.1,\"v\"", "\"tau\":-1,\"v\"");
        let err = parse_grid_json(&text).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { id: 2, field: "tau", .. }));
    }

    #[test]
    fn rejects_duplicate_lines_and_missing_slow() {
        let err = parse_grid_json(&two_bus(
            r#"{"from":1,"to":2,"B":1.0},{"from":2,"to":1,"B":2.0}"#,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateLine { from: 1, to: 2 }));
        let text = two_bus(r#"{"from":1,"to":2,"B":1.0}"#).replace("slow", "fast");
        assert!(matches!(parse_grid_json(&text).unwrap_err(), Error::EmptySlowSet));
    }

    #[test]
    fn coupling_uses_voltage_magnitudes() {
        let text = two_bus(r#"{"from":1,"to":2,"B":2.0}"#).replace("\"v\":1.0", "\"v\":0.5");
        let grid = parse_grid_json(&text).unwrap();
        let (_, _, b) = grid.couplings().next().unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn balancing_zeroes_the_sum() {
        let text = two_bus(r#"{"from":1,"to":2,"B":1.0}"#).replace("\"p\":0.5", "\"p\":0.7");
        let grid = parse_grid_json(&text).unwrap().balanced();
        assert!(grid.injection_sum().abs() < 1e-15);
        assert!((grid.bus(1).unwrap().injection - 0.5).abs() < 1e-15);
    }
}
