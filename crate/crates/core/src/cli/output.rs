use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{EnsembleStats, ModelKind};
use crate::spectral::VarianceReport;

/// Writes to a temporary file in the same directory, then renames it over
/// `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let wrap = |e: std::io::Error| Error::File {
        path: path.display().to_string(),
        source: Box::new(e.into()),
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &str, bytes: &[u8]) -> Self {
        let hash = Sha256::digest(bytes);
        InputDigest {
            path: path.to_string(),
            sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// The command line as invoked.
    pub args: Vec<String>,
    pub cli: serde_json::Value,
    /// Resolved configuration, defaults filled in.
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub version: String,
    pub duration_s: f64,
}

/// 1-based ascending ranks; equal values share the lowest rank ("1224").
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| w.total_cmp(v).is_lt()).count())
        .collect()
}

pub(super) fn plot_spec(title: &str, csv: &str, series: &[(&str, &str, &str)]) -> serde_json::Value {
    json!({
        "title": title,
        "data": csv,
        "x": { "column": "bus_id", "label": "slow bus" },
        "y": { "label": "COI frequency variance (rad/s)^2" },
        "series": series
            .iter()
            .map(|(label, column, style)| json!({ "label": label, "column": column, "style": style }))
            .collect::<Vec<_>>(),
    })
}

pub(super) struct CompareTable {
    bus_ids: Vec<u32>,
    analytic: Option<(Vec<f64>, Vec<f64>)>,
    empirical: Vec<(ModelKind, Vec<f64>)>,
    rank_naive: Option<Vec<usize>>,
    rank_corrected: Option<Vec<usize>>,
    pub rank_change: Vec<Option<i64>>,
}

impl CompareTable {
    pub fn build(
        bus_ids: &[u32],
        analytic: Option<&VarianceReport>,
        empirical: &[(ModelKind, EnsembleStats)],
    ) -> Self {
        let empirical: Vec<(ModelKind, Vec<f64>)> =
            empirical.iter().map(|(m, s)| (*m, s.var_coi.clone())).collect();
        let find = |kinds: &[ModelKind]| {
            kinds
                .iter()
                .find_map(|k| empirical.iter().find(|(m, _)| m == k).map(|(_, v)| v.clone()))
        };
        let corrected = analytic.map(|r| r.var_total.clone()).or_else(|| {
            find(&[ModelKind::FullNonlinear, ModelKind::FullLinear, ModelKind::ReducedXi])
        });
        let naive = analytic
            .map(|r| r.var_naive().to_vec())
            .or_else(|| find(&[ModelKind::ReducedNaive]));
        let rank_naive = naive.as_deref().map(competition_ranks);
        let rank_corrected = corrected.as_deref().map(competition_ranks);
        let rank_change = (0..bus_ids.len())
            .map(|k| match (&rank_naive, &rank_corrected) {
                (Some(n), Some(c)) => Some(n[k] as i64 - c[k] as i64),
                _ => None,
            })
            .collect();
        CompareTable {
            bus_ids: bus_ids.to_vec(),
            analytic: analytic.map(|r| (r.var_total.clone(), r.var_naive().to_vec())),
            empirical,
            rank_naive,
            rank_corrected,
            rank_change,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W, order_by_naive: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["bus_id".to_string(), "var_analytic".into(), "var_naive_analytic".into()];
        header.extend(self.empirical.iter().map(|(m, _)| format!("var_{}", m.name())));
        header.extend(["rank_naive".into(), "rank_corrected".into(), "rank_change".into()]);
        w.write_record(&header)?;

        let mut order: Vec<usize> = (0..self.bus_ids.len()).collect();
        if let (true, Some(ranks)) = (order_by_naive, &self.rank_naive) {
            order.sort_by_key(|&k| (ranks[k], self.bus_ids[k]));
        }
        let opt = |v: Option<String>| v.unwrap_or_default();
        for k in order {
            let mut row = vec![self.bus_ids[k].to_string()];
            row.push(opt(self.analytic.as_ref().map(|a| a.0[k].to_string())));
            row.push(opt(self.analytic.as_ref().map(|a| a.1[k].to_string())));
            row.extend(self.empirical.iter().map(|(_, v)| v[k].to_string()));
            row.push(opt(self.rank_naive.as_ref().map(|r| r[k].to_string())));
            row.push(opt(self.rank_corrected.as_ref().map(|r| r[k].to_string())));
            row.push(opt(self.rank_change[k].map(|c| c.to_string())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
