//! Reader for the plain-text MATPOWER case layout (`mpc.bus`, `mpc.gen`,
//! `mpc.branch`). Shunts, tap ratios, phase shifts and resistances are
//! ignored: only the series reactance enters the coupling.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Bus, Grid, Line, SpeedClass};
use crate::error::{Error, Result};

/// Dynamic and noise parameters assigned to every bus of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassDefaults {
    pub inertia: f64,
    pub damping: f64,
    pub sigma: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatpowerDefaults {
    pub slow: ClassDefaults,
    pub fast: ClassDefaults,
}

impl Default for MatpowerDefaults {
    fn default() -> Self {
        MatpowerDefaults {
            slow: ClassDefaults {
                inertia: 0.2,
                damping: 0.05,
                sigma: 0.0,
                tau: 0.1,
            },
            fast: ClassDefaults {
                inertia: 0.002,
                damping: 0.0005,
                sigma: 0.0,
                tau: 0.1,
            },
        }
    }
}

struct Table {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    fn column(&self, row: &(usize, Vec<f64>), col: usize, name: &str) -> Result<f64> {
        row.1.get(col).copied().ok_or_else(|| Error::MatpowerSyntax {
            line: row.0,
            message: format!("missing column `{name}`"),
        })
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(k) => &line[..k],
        None => line,
    }
}

fn find_table(text: &str, name: &'static str) -> Result<Table> {
    let header = format!("mpc.{name}");
    let mut lines = text.lines().enumerate();
    let mut rows = Vec::new();
    while let Some((k, raw)) = lines.next() {
        let line = strip_comment(raw);
        let Some(rest) = line.trim_start().strip_prefix(&header) else {
            continue;
        };
        let Some(rest) = rest.trim_start().strip_prefix('=') else {
            continue;
        };
        let Some(mut body) = rest.trim_start().strip_prefix('[') else {
            continue;
        };
        let mut lineno = k + 1;
        loop {
            let (content, closed) = match body.find(']') {
                Some(end) => (&body[..end], true),
                None => (body, false),
            };
            for chunk in content.split(';') {
                let chunk = chunk.trim();
                if chunk.is_empty() {
                    continue;
                }
                let values = chunk
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::MatpowerSyntax {
                            line: lineno,
                            message: format!("cannot parse `{t}` as a number"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push((lineno, values));
            }
            if closed {
                return Ok(Table { rows });
            }
            match lines.next() {
                Some((k, raw)) => {
                    lineno = k + 1;
                    body = strip_comment(raw);
                }
                None => {
                    return Err(Error::MatpowerSyntax {
                        line: lineno,
                        message: format!("unterminated table `{header}`"),
                    })
                }
            }
        }
    }
    Err(Error::MissingTable(name))
}

fn base_mva(text: &str) -> f64 {
    text.lines()
        .map(strip_comment)
        .filter_map(|l| l.trim().strip_prefix("mpc.baseMVA"))
        .filter_map(|rest| rest.trim().strip_prefix('='))
        .filter_map(|v| v.trim().trim_end_matches(';').trim().parse().ok())
        .next()
        .unwrap_or(100.0)
}

fn bus_id(value: f64, line: usize) -> Result<u32> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u32)
    } else {
        Err(Error::MatpowerSyntax {
            line,
            message: format!("invalid bus number {value}"),
        })
    }
}

/// Builds a grid from a MATPOWER case. Buses carrying an in-service
/// generator are slow, all others fast. Injections are `(Pg - Pd) / baseMVA`
/// and are not rebalanced; see [`Grid::balanced`].
pub fn parse_matpower_case(text: &str, defaults: &MatpowerDefaults) -> Result<Grid> {
    let bus_table = find_table(text, "bus")?;
    let gen_table = find_table(text, "gen")?;
    let branch_table = find_table(text, "branch")?;
    let base = base_mva(text);

    let mut generation: HashMap<u32, f64> = HashMap::new();
    for row in &gen_table.rows {
        let id = bus_id(gen_table.column(row, 0, "GEN_BUS")?, row.0)?;
        let pg = gen_table.column(row, 1, "PG")?;
        let status = row.1.get(7).copied().unwrap_or(1.0);
        if status > 0.0 {
            *generation.entry(id).or_insert(0.0) += pg;
        }
    }

    let mut buses = Vec::with_capacity(bus_table.rows.len());
    let mut known = HashSet::new();
    for row in &bus_table.rows {
        let id = bus_id(bus_table.column(row, 0, "BUS_I")?, row.0)?;
        let pd = bus_table.column(row, 2, "PD")?;
        let vm = bus_table.column(row, 7, "VM")?;
        let (class, params) = match generation.get(&id) {
            Some(_) => (SpeedClass::Slow, defaults.slow),
            None => (SpeedClass::Fast, defaults.fast),
        };
        let pg = generation.get(&id).copied().unwrap_or(0.0);
        known.insert(id);
        buses.push(Bus {
            id,
            speed_class: class,
            inertia: params.inertia,
            damping: params.damping,
            injection: (pg - pd) / base,
            noise_sigma: params.sigma,
            noise_tau: params.tau,
            voltage: vm,
        });
    }
    if let Some(&id) = generation.keys().find(|id| !known.contains(id)) {
        return Err(Error::UnknownBus(id));
    }

    // parallel circuits are merged into one line
    let mut merged: BTreeMap<(u32, u32), (usize, f64)> = BTreeMap::new();
    let mut order = Vec::new();
    for row in &branch_table.rows {
        let from = bus_id(branch_table.column(row, 0, "F_BUS")?, row.0)?;
        let to = bus_id(branch_table.column(row, 1, "T_BUS")?, row.0)?;
        let x = branch_table.column(row, 3, "BR_X")?;
        let status = row.1.get(10).copied().unwrap_or(1.0);
        for id in [from, to] {
            if !known.contains(&id) {
                return Err(Error::UnknownBus(id));
            }
        }
        if status <= 0.0 {
            continue;
        }
        if x == 0.0 {
            return Err(Error::ZeroReactance { from, to });
        }
        let key = (from.min(to), from.max(to));
        let entry = merged.entry(key).or_insert_with(|| {
            order.push(key);
            (order.len() - 1, 0.0)
        });
        entry.1 += 1.0 / x;
    }
    let lines = order
        .into_iter()
        .map(|key| Line {
            from: key.0,
            to: key.1,
            susceptance: merged[&key].1,
        })
        .collect();
    Grid::new(buses, lines, Some(base))
}
