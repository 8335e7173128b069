use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{completion_time, mean, slowdown_by_duration, std_dev, DurationBucket};
use crate::baselines::{PackerAgent, RandomAgent, SjfAgent};
use crate::env::{run_episode_in, Agent, EnvConfig, EpisodeRecord, SchedulingEnv};
use crate::error::{Error, Result};
use crate::nn::{load_policy, Checkpoint, PolicyNet};
use crate::seeds::{derive_seed, first_overlap, rng_for, SeedSpace};
use crate::training::PolicyAgent;
use crate::workload::{generate_jobset, Jobset, WorkloadConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentSpec {
    Sjf,
    Packer,
    Random,
    /// Greedy policy loaded from a checkpoint file.
    Policy(PathBuf),
}

impl std::str::FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sjf" => Ok(AgentSpec::Sjf),
            "packer" => Ok(AgentSpec::Packer),
            "random" => Ok(AgentSpec::Random),
            other => match other.strip_prefix("policy:") {
                Some(path) if !path.is_empty() => Ok(AgentSpec::Policy(PathBuf::from(path))),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown agent '{other}' (expected sjf, packer, random or policy:<checkpoint>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentSpec::Sjf => write!(f, "sjf"),
            AgentSpec::Packer => write!(f, "packer"),
            AgentSpec::Random => write!(f, "random"),
            AgentSpec::Policy(p) => write!(f, "policy:{}", p.display()),
        }
    }
}

/// Parses a comma-separated agent list such as `sjf,random,policy:run/final.json`.
pub fn parse_agents(list: &str) -> Result<Vec<AgentSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// An agent ready to be instantiated per episode.
#[derive(Debug, Clone)]
pub enum AgentFactory {
    Sjf,
    Packer,
    Random,
    Policy { name: String, net: PolicyNet },
}

impl AgentFactory {
    pub fn name(&self) -> String {
        match self {
            AgentFactory::Sjf => "sjf".into(),
            AgentFactory::Packer => "packer".into(),
            AgentFactory::Random => "random".into(),
            AgentFactory::Policy { name, .. } => name.clone(),
        }
    }

    /// Builds an agent; `stream` seeds the random agent.
    pub fn build(&self, stream: u64) -> Box<dyn Agent + Send> {
        match self {
            AgentFactory::Sjf => Box::new(SjfAgent),
            AgentFactory::Packer => Box::new(PackerAgent),
            AgentFactory::Random => Box::new(RandomAgent::new(rng_for(stream, SeedSpace::Agent, &[]))),
            AgentFactory::Policy { name, net } => Box::new(PolicyAgent::new(net.clone(), name.clone())),
        }
    }
}

/// Checks a policy's input and output sizes against an environment.
pub fn check_policy_fits(net: &PolicyNet, env: &EnvConfig) -> Result<()> {
    let layout = env.layout();
    let want = [1, layout.rows, layout.width()];
    if net.arch.input != want || net.num_actions() != env.num_actions() {
        return Err(Error::ShapeMismatch {
            expected: format!("input {want:?} with {} actions", env.num_actions()),
            got: format!("input {:?} with {} actions", net.arch.input, net.num_actions()),
        });
    }
    Ok(())
}

/// Loads checkpoints and validates them against `env`. Also returns the
/// training jobset seeds recorded in policy checkpoints.
pub fn resolve_agents(specs: &[AgentSpec], env: &EnvConfig) -> Result<(Vec<AgentFactory>, Vec<u64>)> {
    let mut seen_training = Vec::new();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        out.push(match spec {
            AgentSpec::Sjf => AgentFactory::Sjf,
            AgentSpec::Packer => AgentFactory::Packer,
            AgentSpec::Random => AgentFactory::Random,
            AgentSpec::Policy(path) => {
                let ckpt = Checkpoint::load(path)?;
                if let Some(seeds) = crate::pipeline::training_seeds_of(&ckpt) {
                    seen_training.extend(seeds);
                }
                let net = load_policy(path)?;
                check_policy_fits(&net, env)?;
                AgentFactory::Policy {
                    name: spec.to_string(),
                    net,
                }
            }
        });
    }
    Ok((out, seen_training))
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub env: EnvConfig,
    pub workload: WorkloadConfig,
    pub loads: Vec<f64>,
    pub agents: Vec<AgentFactory>,
    pub seeds_per_cell: usize,
    /// Base of the held-out jobset seed namespace.
    pub base_seed: u64,
    pub gamma: f64,
    /// Jobset seeds used in training; the sweep refuses to reuse any.
    pub training_seeds: Vec<u64>,
}

/// Held-out jobset seeds, shared by every load and agent so comparisons are
/// paired.
pub fn eval_seeds(base_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|i| derive_seed(base_seed, SeedSpace::EvalJobsets, &[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub load: f64,
    pub arrival_rate: f64,
    pub agent: String,
    pub seed: u64,
    /// Mean slowdown of the episode's finished jobs; NaN if none finished.
    pub slowdown: f64,
    /// Empty when the episode was censored.
    pub makespan: Option<u32>,
    /// Discounted total reward.
    pub reward: f64,
    pub jobs: usize,
    pub censored: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub load: f64,
    pub agent: String,
    pub episodes: usize,
    /// Mean and sample standard deviation of per-episode mean slowdown.
    pub mean_slowdown: f64,
    pub std_slowdown: f64,
    /// Mean slowdown pooled over all finished jobs of the cell.
    pub pooled_slowdown: f64,
    pub mean_makespan: f64,
    pub std_makespan: f64,
    /// Episodes without a makespan because of censoring.
    pub censored_episodes: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
    pub censored_jobs: usize,
    pub dropped_jobs: usize,
}

#[derive(Debug, Clone)]
pub struct CellRecords {
    pub load: f64,
    pub agent: String,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub records: Vec<CellRecords>,
}

impl SweepReport {
    pub fn cell(&self, load: f64, agent: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.load == load && c.agent == agent)
    }

    /// Per-episode slowdowns of one cell, in seed order.
    pub fn slowdowns(&self, load: f64, agent: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.load == load && r.agent == agent)
            .map(|r| r.slowdown)
            .collect()
    }

    pub fn records(&self, load: f64, agent: &str) -> Option<&[EpisodeRecord]> {
        self.records
            .iter()
            .find(|c| c.load == load && c.agent == agent)
            .map(|c| c.records.as_slice())
    }
}

/// Runs one agent on every jobset with invariant checking enabled.
pub fn evaluate_agent(
    agent: &AgentFactory,
    jobsets: &[Jobset],
    env: &EnvConfig,
    stream: u64,
) -> Result<Vec<EpisodeRecord>> {
    jobsets
        .par_iter()
        .enumerate()
        .map(|(i, jobset)| {
            let mut sim = SchedulingEnv::new(env.clone())?;
            sim.set_checked(true);
            let mut a = agent.build(derive_seed(stream, SeedSpace::Agent, &[i as u64]));
            run_episode_in(&mut sim, jobset, &mut a, false)
        })
        .collect()
}

pub fn summarize(load: f64, agent: &str, rows: &[SweepRow]) -> CellSummary {
    let slowdowns: Vec<f64> = rows.iter().map(|r| r.slowdown).filter(|s| !s.is_nan()).collect();
    let makespans: Vec<f64> = rows.iter().filter_map(|r| r.makespan.map(f64::from)).collect();
    let rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    CellSummary {
        load,
        agent: agent.to_string(),
        episodes: rows.len(),
        mean_slowdown: mean(&slowdowns),
        std_slowdown: std_dev(&slowdowns),
        pooled_slowdown: f64::NAN,
        mean_makespan: mean(&makespans),
        std_makespan: std_dev(&makespans),
        censored_episodes: rows.len() - makespans.len(),
        mean_reward: mean(&rewards),
        max_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        censored_jobs: rows.iter().map(|r| r.censored).sum(),
        dropped_jobs: rows.iter().map(|r| r.dropped).sum(),
    }
}

fn episode_row(load: f64, arrival_rate: f64, agent: &str, rec: &EpisodeRecord, gamma: f64) -> SweepRow {
    let done: Vec<f64> = rec.results.iter().filter(|j| !j.censored).map(|j| j.slowdown()).collect();
    SweepRow {
        load,
        arrival_rate,
        agent: agent.to_string(),
        seed: rec.seed,
        slowdown: mean(&done),
        makespan: completion_time(rec).ok(),
        reward: rec.discounted_reward(gamma),
        jobs: rec.results.len() + rec.dropped,
        censored: rec.censored(),
        dropped: rec.dropped,
    }
}

/// Evaluates every agent at every load on `seeds_per_cell` held-out jobsets.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let seeds = eval_seeds(spec.base_seed, spec.seeds_per_cell);
    if let Some(s) = first_overlap(&spec.training_seeds, &seeds) {
        return Err(Error::InvariantViolation(format!(
            "evaluation jobset seed {s} was also used for training"
        )));
    }
    let mut report = SweepReport::default();
    for (li, &load) in spec.loads.iter().enumerate() {
        let workload = spec.workload.clone().with_load(load);
        let jobsets: Vec<Jobset> = seeds
            .iter()
            .map(|&s| generate_jobset(&workload, spec.env.mode, s))
            .collect::<Result<_>>()?;
        for (ai, agent) in spec.agents.iter().enumerate() {
            let name = agent.name();
            let stream = derive_seed(spec.base_seed, SeedSpace::Agent, &[li as u64, ai as u64]);
            let records = evaluate_agent(agent, &jobsets, &spec.env, stream)?;
            let rows: Vec<SweepRow> = records
                .iter()
                .map(|r| episode_row(load, workload.arrival_rate, &name, r, spec.gamma))
                .collect();
            let mut cell = summarize(load, &name, &rows);
            cell.pooled_slowdown = super::metrics::average_slowdown(&records).unwrap_or(f64::NAN);
            log::info!(
                "load {load:.2} {name}: slowdown {:.3} ± {:.3}",
                cell.mean_slowdown,
                cell.std_slowdown
            );
            report.rows.extend(rows);
            report.cells.push(cell);
            report.records.push(CellRecords {
                load,
                agent: name,
                records,
            });
        }
    }
    Ok(report)
}

/// Writes `sweep.csv` (one row per episode), `sweep_summary.csv`,
/// `slowdown_by_duration.csv` and a `sweep.json` sidecar echoing `config`.
pub fn write_sweep(dir: &Path, report: &SweepReport, config: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("sweep_summary.csv"))?;
    for cell in &report.cells {
        w.serialize(cell)?;
    }
    w.flush()?;
    let buckets: Vec<(f64, String, Vec<DurationBucket>)> = report
        .records
        .iter()
        .map(|c| (c.load, c.agent.clone(), slowdown_by_duration(&c.records)))
        .collect();
    super::metrics::write_buckets_csv(&dir.join("slowdown_by_duration.csv"), &buckets)?;
    let sidecar = serde_json::json!({
        "config": config,
        "files": ["sweep.csv", "sweep_summary.csv", "slowdown_by_duration.csv"],
    });
    std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
