use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::mean;
use crate::error::{Error, Result};
use crate::pipeline::MetricsRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveMeans {
    pub mean_discounted_reward: f64,
    pub max_discounted_reward: f64,
    pub mean_slowdown: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub epochs: usize,
    /// Epochs averaged at each end: `ceil(epochs / 4)`.
    pub window: usize,
    pub first_quartile: CurveMeans,
    pub last_quartile: CurveMeans,
}

impl CurveSummary {
    /// Last-quartile minus first-quartile mean reward.
    pub fn reward_trend(&self) -> f64 {
        self.last_quartile.mean_discounted_reward - self.first_quartile.mean_discounted_reward
    }

    pub fn slowdown_trend(&self) -> f64 {
        self.last_quartile.mean_slowdown - self.first_quartile.mean_slowdown
    }
}

fn means(rows: &[MetricsRow]) -> CurveMeans {
    let pick = |f: fn(&MetricsRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    CurveMeans {
        mean_discounted_reward: pick(|r| r.mean_discounted_reward),
        max_discounted_reward: pick(|r| r.max_discounted_reward),
        mean_slowdown: pick(|r| r.mean_slowdown),
    }
}

/// Means over the first and last quarter of the epochs.
pub fn summarize_curve(rows: &[MetricsRow]) -> Result<CurveSummary> {
    if rows.is_empty() {
        return Err(Error::MalformedLog("metrics log has no epochs".into()));
    }
    let window = rows.len().div_ceil(4);
    Ok(CurveSummary {
        epochs: rows.len(),
        window,
        first_quartile: means(&rows[..window]),
        last_quartile: means(&rows[rows.len() - window..]),
    })
}

/// Parses a metrics log, checking that epochs are consecutive from the first.
pub fn read_curve(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::MalformedLog(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let row: MetricsRow = row.map_err(|e| Error::MalformedLog(format!("row {}: {e}", i + 1)))?;
        if let Some(prev) = rows.last() {
            if row.epoch != prev.epoch + 1 {
                return Err(Error::MalformedLog(format!(
                    "epoch {} follows epoch {}",
                    row.epoch, prev.epoch
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a metrics log and writes a tidy `epoch,metric,value` CSV plus a JSON
/// summary next to `out_csv`.
pub fn training_curves(metrics: &Path, out_csv: &Path) -> Result<CurveSummary> {
    let rows = read_curve(metrics)?;
    let summary = summarize_curve(&rows)?;
    let mut w = csv::Writer::from_path(out_csv)?;
    w.write_record(["epoch", "metric", "value"])?;
    for r in &rows {
        for (name, value) in [
            ("mean_discounted_reward", r.mean_discounted_reward),
            ("max_discounted_reward", r.max_discounted_reward),
            ("mean_slowdown", r.mean_slowdown),
            ("entropy", r.entropy),
        ] {
            w.write_record([r.epoch.to_string(), name.to_string(), value.to_string()])?;
        }
    }
    w.flush()?;
    std::fs::write(
        out_csv.with_extension("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
