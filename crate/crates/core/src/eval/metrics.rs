use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EpisodeRecord;
use crate::error::{Error, Result};

/// Buckets with fewer finished jobs than this are flagged as sparse.
pub const MIN_BUCKET: usize = 5;

/// Slowdowns of every finished, uncensored job across `records`.
pub fn finished_slowdowns(records: &[EpisodeRecord]) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| r.results.iter().filter(|j| !j.censored).map(|j| j.slowdown()))
        .collect()
}

/// Mean slowdown over all finished jobs of all episodes.
pub fn average_slowdown(records: &[EpisodeRecord]) -> Result<f64> {
    let s = finished_slowdowns(records);
    if s.is_empty() {
        return Err(Error::NoFinishedJobs);
    }
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Last completion minus earliest arrival. Censored episodes have no
/// completion time; an episode without jobs has zero.
pub fn completion_time(record: &EpisodeRecord) -> Result<u32> {
    if record.censored() > 0 {
        return Err(Error::Censored(format!(
            "episode {} has {} censored jobs",
            record.seed,
            record.censored()
        )));
    }
    let first = record.results.iter().map(|j| j.arrival_time).min();
    let last = record.results.iter().map(|j| j.completed_at()).max();
    Ok(match (first, last) {
        (Some(a), Some(c)) => c - a,
        _ => 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (position `q·(n−1)`).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Quartiles {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBucket {
    pub duration: u32,
    pub count: usize,
    #[serde(flatten)]
    pub quartiles: Quartiles,
    /// Fewer than [`MIN_BUCKET`] jobs.
    pub sparse: bool,
}

/// Slowdown quartiles per distinct job duration, over finished jobs.
pub fn slowdown_by_duration(records: &[EpisodeRecord]) -> Vec<DurationBucket> {
    let mut by: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in records {
        for j in r.results.iter().filter(|j| !j.censored) {
            by.entry(j.ideal).or_default().push(j.slowdown());
        }
    }
    by.into_iter()
        .map(|(duration, values)| {
            if values.len() < MIN_BUCKET {
                log::warn!("duration {duration}: only {} finished jobs", values.len());
            }
            DurationBucket {
                duration,
                count: values.len(),
                quartiles: quartiles(&values).expect("bucket is non-empty"),
                sparse: values.len() < MIN_BUCKET,
            }
        })
        .collect()
}

/// Writes bucket tables of several (load, agent) cells into one CSV.
pub fn write_buckets_csv(path: &Path, cells: &[(f64, String, Vec<DurationBucket>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["load", "agent", "duration", "count", "min", "q1", "median", "q3", "max", "sparse"])?;
    for (load, agent, buckets) in cells {
        for b in buckets {
            let q = &b.quartiles;
            w.write_record([
                load.to_string(),
                agent.clone(),
                b.duration.to_string(),
                b.count.to_string(),
                q.min.to_string(),
                q.q1.to_string(),
                q.median.to_string(),
                q.q3.to_string(),
                q.max.to_string(),
                b.sparse.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
