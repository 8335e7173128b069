//! Synthetic jobset generation.
//!
//! Each job picks one dominant resource whose demand is drawn from the primary
//! range; every other resource draws from the secondary range. Durations are
//! short with probability `short_prob` and long otherwise. Online jobsets use
//! Bernoulli arrivals at unit time resolution; offline jobsets release every
//! job at time 0.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of resource types modelled by the cluster (CPU and memory).
pub const NUM_RESOURCES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Online,
    Offline,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Mode::Online),
            "offline" => Ok(Mode::Offline),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: u32,
    #[serde(rename = "arrival")]
    pub arrival_time: u32,
    pub duration: u32,
    pub demand: [u32; NUM_RESOURCES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jobset {
    pub seed: u64,
    pub mode: Mode,
    pub r: u32,
    pub jobs: Vec<Job>,
    /// Load the generator was configured for; not part of the file format.
    #[serde(skip)]
    pub nominal_load: f64,
}

impl Jobset {
    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Jobset = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    /// Checks id uniqueness, arrival ordering and per-job bounds.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        let mut last_arrival = 0;
        for job in &self.jobs {
            if !ids.insert(job.id) {
                return Err(Error::config(format!("duplicate job id {}", job.id)));
            }
            if job.arrival_time < last_arrival {
                return Err(Error::config("jobs not ordered by arrival"));
            }
            last_arrival = job.arrival_time;
            if job.duration == 0 {
                return Err(Error::config(format!("job {} has zero duration", job.id)));
            }
            if job.demand.iter().any(|&d| d == 0 || d > self.r) {
                return Err(Error::config(format!("job {} demand out of [1, r]", job.id)));
            }
            if self.mode == Mode::Offline && job.arrival_time != 0 {
                return Err(Error::config("offline jobs must arrive at time 0"));
            }
        }
        Ok(())
    }

    /// Arriving resource-time divided by the capacity-time of `window` steps.
    pub fn empirical_load(&self, window: u32) -> f64 {
        let work: u64 = self
            .jobs
            .iter()
            .map(|j| j.demand.iter().map(|&d| d as u64).sum::<u64>() * j.duration as u64)
            .sum();
        work as f64 / (NUM_RESOURCES as f64 * self.r as f64 * window as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Capacity units per resource.
    pub r: u32,
    pub num_resources: usize,
    /// Inclusive duration range of short jobs, in timesteps.
    pub short_duration: [u32; 2],
    /// Inclusive duration range of long jobs, in timesteps.
    pub long_duration: [u32; 2],
    pub short_prob: f64,
    /// Dominant-resource demand range as fractions of `r`.
    pub primary_demand: [f64; 2],
    /// Non-dominant demand range as fractions of `r`.
    pub secondary_demand: [f64; 2],
    pub arrival_window: u32,
    /// Expected arrivals per timestep (online).
    pub arrival_rate: f64,
    /// Jobs per offline jobset.
    pub num_jobs: usize,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            r: 20,
            num_resources: NUM_RESOURCES,
            short_duration: [1, 3],
            long_duration: [10, 15],
            short_prob: 0.8,
            primary_demand: [0.5, 1.0],
            secondary_demand: [0.1, 0.2],
            arrival_window: 50,
            arrival_rate: 0.0,
            num_jobs: 30,
        }
    }
}

/// `⌈x⌉` tolerant of representation error in products like `0.1 * 30`.
fn ceil_units(fraction: f64, r: u32) -> u32 {
    (fraction * r as f64 - 1e-9).ceil().max(0.0) as u32
}

fn mean_of(range: [u32; 2]) -> f64 {
    (range[0] as f64 + range[1] as f64) / 2.0
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_resources != NUM_RESOURCES {
            return Err(Error::config(format!(
                "num_resources must be {NUM_RESOURCES}, got {}",
                self.num_resources
            )));
        }
        if self.r == 0 {
            return Err(Error::config("r must be positive"));
        }
        if !(self.short_prob > 0.0 && self.short_prob < 1.0) {
            return Err(Error::config("short_prob must lie in (0, 1)"));
        }
        for (name, range) in [("short_duration", self.short_duration), ("long_duration", self.long_duration)] {
            if range[0] == 0 || range[0] > range[1] {
                return Err(Error::config(format!("{name} must be a non-empty range of positive steps")));
            }
        }
        for (name, range) in [("primary_demand", self.primary_demand()), ("secondary_demand", self.secondary_demand())] {
            if range[0] == 0 || range[0] > range[1] || range[1] > self.r {
                return Err(Error::config(format!(
                    "{name} discretizes to empty or out-of-capacity range {range:?}"
                )));
            }
        }
        if !self.arrival_rate.is_finite() || self.arrival_rate < 0.0 {
            return Err(Error::config("arrival_rate must be finite and non-negative"));
        }
        Ok(())
    }

    /// Inclusive integer range of the dominant demand.
    pub fn primary_demand(&self) -> [u32; 2] {
        [
            ceil_units(self.primary_demand[0], self.r),
            ceil_units(self.primary_demand[1], self.r),
        ]
    }

    /// Inclusive integer range of non-dominant demands.
    pub fn secondary_demand(&self) -> [u32; 2] {
        [
            ceil_units(self.secondary_demand[0], self.r),
            ceil_units(self.secondary_demand[1], self.r),
        ]
    }

    pub fn max_duration(&self) -> u32 {
        self.short_duration[1].max(self.long_duration[1])
    }

    pub fn expected_duration(&self) -> f64 {
        self.short_prob * mean_of(self.short_duration)
            + (1.0 - self.short_prob) * mean_of(self.long_duration)
    }

    /// Expected total demand summed over resources.
    pub fn expected_demand_sum(&self) -> f64 {
        mean_of(self.primary_demand())
            + (self.num_resources as f64 - 1.0) * mean_of(self.secondary_demand())
    }

    /// Closed-form expected cluster load for the configured arrival rate.
    pub fn compute_load(&self) -> f64 {
        self.load_at_rate(self.arrival_rate)
    }

    pub fn load_at_rate(&self, rate: f64) -> f64 {
        rate * self.expected_duration() * self.expected_demand_sum()
            / (self.num_resources as f64 * self.r as f64)
    }

    /// Inverse of [`load_at_rate`](Self::load_at_rate).
    pub fn rate_for_load(&self, load: f64) -> f64 {
        load * self.num_resources as f64 * self.r as f64
            / (self.expected_duration() * self.expected_demand_sum())
    }

    /// Returns a copy whose arrival rate produces `load`.
    pub fn with_load(&self, load: f64) -> Self {
        WorkloadConfig {
            arrival_rate: self.rate_for_load(load),
            ..self.clone()
        }
    }
}

pub fn sample_job<R: Rng + ?Sized>(rng: &mut R, config: &WorkloadConfig, id: u32, arrival_time: u32) -> Job {
    let short = rng.gen_bool(config.short_prob);
    let range = if short { config.short_duration } else { config.long_duration };
    let duration = rng.gen_range(range[0]..=range[1]);
    let dominant = rng.gen_range(0..NUM_RESOURCES);
    let primary = config.primary_demand();
    let secondary = config.secondary_demand();
    let mut demand = [0; NUM_RESOURCES];
    for (k, d) in demand.iter_mut().enumerate() {
        let range = if k == dominant { primary } else { secondary };
        *d = rng.gen_range(range[0]..=range[1]);
    }
    Job {
        id,
        arrival_time,
        duration,
        demand,
    }
}

/// Generates one jobset from its own seeded stream.
pub fn generate_jobset(config: &WorkloadConfig, mode: Mode, seed: u64) -> Result<Jobset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_jobset_with(&mut rng, config, mode, seed)
}

pub fn generate_jobset_with<R: Rng + ?Sized>(
    rng: &mut R,
    config: &WorkloadConfig,
    mode: Mode,
    seed: u64,
) -> Result<Jobset> {
    config.validate()?;
    let mut jobs = Vec::new();
    match mode {
        Mode::Online => {
            let p = config.arrival_rate.min(1.0);
            for t in 0..config.arrival_window {
                if rng.gen_bool(p) {
                    let id = jobs.len() as u32;
                    jobs.push(sample_job(rng, config, id, t));
                }
            }
        }
        Mode::Offline => {
            if config.num_jobs == 0 {
                return Err(Error::config("offline jobsets need num_jobs > 0"));
            }
            for id in 0..config.num_jobs {
                jobs.push(sample_job(rng, config, id as u32, 0));
            }
        }
    }
    Ok(Jobset {
        seed,
        mode,
        r: config.r,
        jobs,
        nominal_load: match mode {
            Mode::Online => config.compute_load(),
            Mode::Offline => 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn online(rate: f64) -> WorkloadConfig {
        WorkloadConfig {
            arrival_rate: rate,
            ..WorkloadConfig::default()
        }
    }

    #[test]
    fn discretized_ranges_for_r20() {
        let c = WorkloadConfig::default();
        assert_eq!(c.primary_demand(), [10, 20]);
        assert_eq!(c.secondary_demand(), [2, 4]);
    }

    #[test]
    fn ceil_survives_representation_error() {
        let c = WorkloadConfig {
            r: 30,
            ..WorkloadConfig::default()
        };
        assert_eq!(c.secondary_demand(), [3, 6]);
    }

    #[test]
    fn closed_form_load_r20() {
        let c = online(1.0);
        assert!((c.expected_duration() - 4.1).abs() < 1e-12);
        assert!((c.expected_demand_sum() - 18.0).abs() < 1e-12);
        assert!((c.compute_load() - 1.845).abs() < 1e-12);
        assert_eq!(online(0.0).compute_load(), 0.0);
    }

    #[test]
    fn rate_for_load_round_trip() {
        let c = WorkloadConfig::default();
        for load in [0.1, 0.7, 1.0, 1.3, 1.9] {
            let back = c.with_load(load).compute_load();
            assert!((back - load).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let c = WorkloadConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut work = 0.0;
        for i in 0..n {
            let j = sample_job(&mut rng, &c, i, 0);
            work += (j.demand.iter().sum::<u32>() * j.duration) as f64;
        }
        let mc_load = work / n as f64 / 40.0;
        assert!((mc_load - 1.845).abs() / 1.845 < 0.02, "{mc_load}");
    }

    #[test]
    fn zero_rate_is_empty() {
        let set = generate_jobset(&online(0.0), Mode::Online, 3).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn offline_releases_everything_at_zero() {
        let c = WorkloadConfig {
            num_jobs: 10,
            ..WorkloadConfig::default()
        };
        let set = generate_jobset(&c, Mode::Offline, 1).unwrap();
        assert_eq!(set.len(), 10);
        assert!(set.jobs.iter().all(|j| j.arrival_time == 0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_jobset(&online(-0.1), Mode::Online, 0).is_err());
        let c = WorkloadConfig {
            num_jobs: 0,
            ..WorkloadConfig::default()
        };
        assert!(generate_jobset(&c, Mode::Offline, 0).is_err());
        let c = WorkloadConfig {
            short_prob: 1.0,
            ..WorkloadConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_fraction_and_ranges() {
        let c = WorkloadConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut short = 0;
        for i in 0..n {
            let j = sample_job(&mut rng, &c, i, 0);
            if j.duration <= 3 {
                assert!(j.duration >= 1);
                short += 1;
            } else {
                assert!((10..=15).contains(&j.duration));
            }
            let dominant = j.demand.iter().filter(|&&d| (10..=20).contains(&d)).count();
            let minor = j.demand.iter().filter(|&&d| (2..=4).contains(&d)).count();
            assert_eq!((dominant, minor), (1, 1), "{j:?}");
        }
        let frac = short as f64 / n as f64;
        assert!((frac - 0.8).abs() < 0.01, "{frac}");
    }

    #[test]
    fn mean_arrival_count_matches_bernoulli() {
        // Oracle: Bernoulli(p) over n steps has mean n * p = 50 * 0.7 = 35.
        let c = WorkloadConfig {
            arrival_rate: 0.7,
            arrival_window: 50,
            ..WorkloadConfig::default()
        };
        let seeds = 10_000;
        let total: usize = (0..seeds)
            .map(|s| generate_jobset(&c, Mode::Online, s).unwrap().len())
            .sum();
        let mean = total as f64 / seeds as f64;
        assert!((mean - 35.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn empirical_load_converges() {
        // Per-jobset load has sd ~0.24 here, so the mean needs thousands of
        // jobsets before a 2% band is wider than the sampling noise.
        let c = WorkloadConfig::default().with_load(0.9);
        let n = 5000;
        let mut acc = 0.0;
        for s in 0..n {
            acc += generate_jobset(&c, Mode::Online, s).unwrap().empirical_load(c.arrival_window);
        }
        let mean = acc / n as f64;
        assert!((mean - 0.9).abs() / 0.9 < 0.02, "{mean}");
    }

    #[test]
    fn serialization_is_deterministic() {
        let c = WorkloadConfig::default().with_load(0.7);
        let a = generate_jobset(&c, Mode::Online, 42).unwrap().to_json().unwrap();
        let b = generate_jobset(&c, Mode::Online, 42).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let back = Jobset::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
        assert!(a.starts_with("{\"seed\":42,\"mode\":\"online\",\"r\":20,\"jobs\":["));
    }
}
