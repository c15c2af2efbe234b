//! Plot-ready tables from metrics CSVs: a long format with one row per
//! (strategy, seed, series, x) and a per-point mean/stdev summary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{parse_csv, MetricsRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Accuracy against the fraction of the original training set labeled.
    AccuracyCurve,
    /// Mean acquisition value of selected and generated samples per iteration.
    AcqValueCurve,
    /// Mean reconstruction distance per iteration.
    ReconCurve,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::AccuracyCurve, PlotKind::AcqValueCurve, PlotKind::ReconCurve];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::AccuracyCurve => "accuracy_curve",
            PlotKind::AcqValueCurve => "acq_value_curve",
            PlotKind::ReconCurve => "recon_curve",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown plot kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub strategy: String,
    pub seed: Option<u64>,
    pub series: &'static str,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub series: &'static str,
    pub x: f64,
    pub mean: f64,
    pub stdev: f64,
    pub n: usize,
}

pub const LONG_HEADER: &str = "strategy,seed,series,x,y";
pub const SUMMARY_HEADER: &str = "strategy,series,x,mean,stdev,n";

/// Splits `<strategy>_seed<N>.csv`; other names keep the whole stem as the
/// strategy and have no seed.
pub fn parse_run_name(path: &Path) -> (String, Option<u64>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
    if let Some((strategy, seed)) = stem.rsplit_once("_seed") {
        if let Ok(seed) = seed.parse() {
            return (strategy.to_string(), Some(seed));
        }
    }
    (stem, None)
}

pub fn rows_for(kind: PlotKind, strategy: &str, seed: Option<u64>, records: &[MetricsRecord]) -> Vec<PlotRow> {
    let row = |series, x, y| PlotRow {
        strategy: strategy.to_string(),
        seed,
        series,
        x,
        y,
    };
    let mut out = Vec::new();
    for r in records {
        let it = r.iteration as f64;
        match kind {
            PlotKind::AccuracyCurve => {
                // Real labeled plus remaining pool is the original training set.
                let total = (r.labeled_count + r.pool_count).max(1) as f64;
                out.push(row("accuracy", r.labeled_count as f64 / total, r.test_accuracy));
            }
            PlotKind::AcqValueCurve => {
                out.push(row("selected", it, r.mean_acq_selected));
                out.push(row("generated", it, r.mean_acq_generated));
            }
            PlotKind::ReconCurve => out.push(row("recon_distance", it, r.mean_recon_distance)),
        }
    }
    out
}

pub fn load_rows(kind: PlotKind, paths: &[PathBuf]) -> Result<Vec<PlotRow>> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no metrics files given".into()));
    }
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let records = parse_csv(&text).map_err(|e| Error::Schema {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        let (strategy, seed) = parse_run_name(path);
        out.extend(rows_for(kind, &strategy, seed, &records));
    }
    Ok(out)
}

/// Mean and sample standard deviation per (strategy, series, x), in order
/// of first appearance.
pub fn summarize(rows: &[PlotRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, &'static str, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, &'static str, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.strategy.clone(), r.series, r.x.to_bits());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.push(r.y);
    }
    order
        .into_iter()
        .map(|key| {
            let ys = &groups[&key];
            let n = ys.len();
            let mean = ys.iter().sum::<f64>() / n as f64;
            let stdev = if n > 1 {
                (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                strategy: key.0,
                series: key.1,
                x: f64::from_bits(key.2),
                mean,
                stdev,
                n,
            }
        })
        .collect()
}

pub fn long_csv(rows: &[PlotRow]) -> String {
    let mut s = format!("{LONG_HEADER}\n");
    for r in rows {
        let seed = r.seed.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{},{}\n", r.strategy, seed, r.series, r.x, r.y));
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.strategy, r.series, r.x, r.mean, r.stdev, r.n
        ));
    }
    s
}
