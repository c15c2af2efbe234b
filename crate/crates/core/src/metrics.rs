//! Per-iteration metrics and their CSV form.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iteration,labeled_count,generated_count,pool_count,test_accuracy,mean_acq_selected,mean_acq_generated,mean_recon_distance,loss_rec,loss_prior,loss_disc,loss_cls,loss_gen,wall_seconds";

pub const COLUMNS: [&str; 14] = [
    "iteration",
    "labeled_count",
    "generated_count",
    "pool_count",
    "test_accuracy",
    "mean_acq_selected",
    "mean_acq_generated",
    "mean_recon_distance",
    "loss_rec",
    "loss_prior",
    "loss_disc",
    "loss_cls",
    "loss_gen",
    "wall_seconds",
];

/// One row per acquisition iteration; row 0 is the pretrained model.
/// Quantities a strategy does not produce are 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub labeled_count: usize,
    pub generated_count: usize,
    pub pool_count: usize,
    pub test_accuracy: f64,
    pub mean_acq_selected: f64,
    pub mean_acq_generated: f64,
    pub mean_recon_distance: f64,
    pub loss_rec: f64,
    pub loss_prior: f64,
    pub loss_disc: f64,
    pub loss_cls: f64,
    pub loss_gen: f64,
    pub wall_seconds: f64,
}

impl MetricsRecord {
    fn reals(&self) -> [f64; 10] {
        [
            self.test_accuracy,
            self.mean_acq_selected,
            self.mean_acq_generated,
            self.mean_recon_distance,
            self.loss_rec,
            self.loss_prior,
            self.loss_disc,
            self.loss_cls,
            self.loss_gen,
            self.wall_seconds,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.reals().iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("metrics row {}: {v}", self.iteration)));
        }
        if !(0.0..=1.0).contains(&self.test_accuracy) {
            return Err(Error::InvalidArgument(format!(
                "accuracy {} outside [0, 1]",
                self.test_accuracy
            )));
        }
        Ok(())
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.iteration, self.labeled_count, self.generated_count, self.pool_count
        );
        for v in self.reals() {
            let _ = write!(s, ",{v}");
        }
        s
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let f: Vec<&str> = row.split(',').map(str::trim).collect();
        if f.len() != COLUMNS.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} fields, got {}",
                COLUMNS.len(),
                f.len()
            )));
        }
        let int = |i: usize| -> Result<usize> {
            f[i].parse()
                .map_err(|_| Error::InvalidArgument(format!("{} is not an integer: {:?}", COLUMNS[i], f[i])))
        };
        let real = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| Error::InvalidArgument(format!("{} is not a number: {:?}", COLUMNS[i], f[i])))
        };
        Ok(MetricsRecord {
            iteration: int(0)?,
            labeled_count: int(1)?,
            generated_count: int(2)?,
            pool_count: int(3)?,
            test_accuracy: real(4)?,
            mean_acq_selected: real(5)?,
            mean_acq_generated: real(6)?,
            mean_recon_distance: real(7)?,
            loss_rec: real(8)?,
            loss_prior: real(9)?,
            loss_disc: real(10)?,
            loss_cls: real(11)?,
            loss_gen: real(12)?,
            wall_seconds: real(13)?,
        })
    }
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

/// Parses a metrics CSV, requiring the exact header.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(Error::InvalidArgument(format!("unexpected header {h:?}"))),
        None => return Err(Error::InvalidArgument("empty metrics file".into())),
    }
    lines.map(MetricsRecord::from_csv_row).collect()
}
