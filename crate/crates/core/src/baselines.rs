//! Heuristic agents: shortest-job-first, an alignment-score packer, and
//! uniform random. SJF and the packer only consider jobs that can start in
//! the current timestep and fall back to the void action otherwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Agent, EnvConfig, EnvState, Observation};
use crate::error::Result;
use crate::workload::NUM_RESOURCES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentDecision {
    pub action: Action,
    /// Whether the chosen slot's job can start now. False for void.
    pub fits_now: bool,
}

impl AgentDecision {
    fn void(config: &EnvConfig) -> Self {
        AgentDecision {
            action: config.void_action(),
            fits_now: false,
        }
    }
}

pub fn sjf_action(state: &EnvState, config: &EnvConfig) -> AgentDecision {
    let best = state
        .slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|job| (i, job)))
        .filter(|(i, _)| state.fits_now(*i))
        .min_by_key(|(i, job)| (job.duration, *i));
    match best {
        Some((i, _)) => AgentDecision {
            action: Action(i),
            fits_now: true,
        },
        None => AgentDecision::void(config),
    }
}

/// Dot product of a job's demand with the free capacity in the current row.
pub fn alignment_score(state: &EnvState, demand: &[u32; NUM_RESOURCES]) -> u64 {
    (0..NUM_RESOURCES)
        .map(|k| demand[k] as u64 * state.occupancy.free(k, 0) as u64)
        .sum()
}

pub fn packer_action(state: &EnvState, config: &EnvConfig) -> AgentDecision {
    let mut best: Option<(usize, u64)> = None;
    for (i, slot) in state.slots.iter().enumerate() {
        let Some(job) = slot else { continue };
        if !state.fits_now(i) {
            continue;
        }
        let score = alignment_score(state, &job.demand);
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    match best {
        Some((i, _)) => AgentDecision {
            action: Action(i),
            fits_now: true,
        },
        None => AgentDecision::void(config),
    }
}

pub fn random_action<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Action {
    Action(rng.gen_range(0..config.num_actions()))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SjfAgent;

impl Agent for SjfAgent {
    fn name(&self) -> String {
        "sjf".into()
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        Ok(sjf_action(obs.state, obs.config).action)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PackerAgent;

impl Agent for PackerAgent {
    fn name(&self) -> String {
        "packer".into()
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        Ok(packer_action(obs.state, obs.config).action)
    }
}

#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(rng: ChaCha8Rng) -> Self {
        RandomAgent { rng }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        Ok(random_action(obs.config, &mut self.rng))
    }
}

/// Always picks the void action.
#[derive(Debug, Clone, Copy, Default)]
pub struct VoidAgent;

impl Agent for VoidAgent {
    fn name(&self) -> String {
        "void".into()
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        Ok(obs.config.void_action())
    }
}
