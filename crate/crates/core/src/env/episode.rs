use serde::{Deserialize, Serialize};

use super::{Action, EnvConfig, EnvState, JobResult, SchedulingEnv, StateImage};
use crate::error::Result;
use crate::workload::Jobset;

/// What an agent sees before acting. `image` is present only when the agent
/// asked for it via [`Agent::wants_image`] or the episode is being recorded.
pub struct Observation<'a> {
    pub state: &'a EnvState,
    pub config: &'a EnvConfig,
    pub image: Option<&'a StateImage>,
}

pub trait Agent {
    fn name(&self) -> String;

    fn wants_image(&self) -> bool {
        false
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn wants_image(&self) -> bool {
        (**self).wants_image()
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        (**self).act(obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub agent: String,
    pub config: EnvConfig,
    pub results: Vec<JobResult>,
    /// Reward of every step, zero for allocating steps.
    pub rewards: Vec<f64>,
    pub actions: Vec<usize>,
    pub time_advanced: Vec<bool>,
    pub dropped: usize,
    pub final_clock: u32,
    /// Images seen before each action; kept out of the JSON export.
    #[serde(skip)]
    pub images: Option<Vec<StateImage>>,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn discounted_reward(&self, gamma: f64) -> f64 {
        self.rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
    }

    pub fn censored(&self) -> usize {
        self.results.iter().filter(|r| r.censored).count()
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Drives `agent` over `jobset` until the episode ends. With `record` set,
/// the image seen before every action is retained.
pub fn run_episode(
    jobset: &Jobset,
    config: &EnvConfig,
    agent: &mut dyn Agent,
    record: bool,
) -> Result<EpisodeRecord> {
    let mut env = SchedulingEnv::new(config.clone())?;
    run_episode_in(&mut env, jobset, agent, record)
}

/// Same as [`run_episode`], reusing a configured environment (for example one
/// with invariant checking enabled).
pub fn run_episode_in(
    env: &mut SchedulingEnv,
    jobset: &Jobset,
    agent: &mut dyn Agent,
    record: bool,
) -> Result<EpisodeRecord> {
    env.reset_quiet(jobset)?;
    let wants_image = record || agent.wants_image();
    let mut rec = EpisodeRecord {
        seed: jobset.seed,
        agent: agent.name(),
        config: env.config().clone(),
        results: Vec::new(),
        rewards: Vec::new(),
        actions: Vec::new(),
        time_advanced: Vec::new(),
        dropped: 0,
        final_clock: 0,
        images: record.then(Vec::new),
    };
    while !env.is_done() {
        let image = wants_image.then(|| env.render());
        let action = agent.act(&Observation {
            state: env.state(),
            config: env.config(),
            image: image.as_ref(),
        })?;
        let t = env.transition(action)?;
        rec.rewards.push(t.reward);
        rec.actions.push(action.0);
        rec.time_advanced.push(t.time_advanced);
        if let (Some(images), Some(image)) = (rec.images.as_mut(), image) {
            images.push(image);
        }
    }
    let state = env.state();
    rec.results = state.finished.clone();
    rec.results.sort_by_key(|r| r.id);
    rec.dropped = state.dropped;
    rec.final_clock = state.clock;
    Ok(rec)
}
