use rand::Rng;

use crate::env::{Action, Agent, EnvConfig, Observation, SchedulingEnv};
use crate::error::{Error, Result};
use crate::nn::{argmax, PolicyNet};
use crate::workload::Jobset;

/// Episodic environment as seen by the policy-gradient trainer.
pub trait RolloutEnv {
    fn num_actions(&self) -> usize;

    fn is_done(&self) -> bool;

    /// True when every action produces the same transition. The trainer
    /// then takes [`forced_action`](Self::forced_action) without querying
    /// the policy; such steps carry no gradient in expectation.
    fn is_forced(&self) -> bool {
        false
    }

    fn forced_action(&self) -> usize {
        0
    }

    /// Writes the policy input for the current state into `out`.
    fn observe(&self, out: &mut Vec<f64>);

    /// Applies `action` and returns its reward.
    fn act(&mut self, action: usize) -> Result<f64>;

    /// Mean slowdown of finished jobs, for environments that schedule jobs.
    fn mean_slowdown(&self) -> Option<f64> {
        None
    }
}

/// A scheduling episode over one jobset.
#[derive(Debug, Clone)]
pub struct SchedulingRollout {
    env: SchedulingEnv,
}

impl SchedulingRollout {
    pub fn new(config: &EnvConfig, jobset: &Jobset) -> Result<Self> {
        let mut env = SchedulingEnv::new(config.clone())?;
        env.reset_quiet(jobset)?;
        Ok(SchedulingRollout { env })
    }

    pub fn env(&self) -> &SchedulingEnv {
        &self.env
    }
}

impl RolloutEnv for SchedulingRollout {
    fn num_actions(&self) -> usize {
        self.env.config().num_actions()
    }

    fn is_done(&self) -> bool {
        self.env.is_done()
    }

    fn is_forced(&self) -> bool {
        self.env.state().is_forced_move_on()
    }

    fn forced_action(&self) -> usize {
        self.env.config().void_action().0
    }

    fn observe(&self, out: &mut Vec<f64>) {
        let image = self.env.render();
        out.clear();
        out.extend(image.data.iter().map(|&v| v as f64));
    }

    fn act(&mut self, action: usize) -> Result<f64> {
        Ok(self.env.transition(Action(action))?.reward)
    }

    fn mean_slowdown(&self) -> Option<f64> {
        let done: Vec<f64> = self
            .env
            .state()
            .finished
            .iter()
            .filter(|r| !r.censored)
            .map(|r| r.slowdown())
            .collect();
        (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
    }
}

/// One-step environment paying `rewards[a]` for action `a`. The observation
/// is a constant `1.0`.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    rewards: Vec<f64>,
    done: bool,
}

impl BanditEnv {
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() < 2 {
            return Err(Error::InvalidArgument("a bandit needs at least two arms".into()));
        }
        Ok(BanditEnv { rewards, done: false })
    }
}

impl RolloutEnv for BanditEnv {
    fn num_actions(&self) -> usize {
        self.rewards.len()
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn observe(&self, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
    }

    fn act(&mut self, action: usize) -> Result<f64> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let reward = *self.rewards.get(action).ok_or(Error::ActionOutOfRange {
            index: action,
            max: self.rewards.len() - 1,
        })?;
        self.done = true;
        Ok(reward)
    }
}

/// Draws an index from a categorical distribution.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Scheduling agent backed by a policy network, acting greedily.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    net: PolicyNet,
    name: String,
}

impl PolicyAgent {
    pub fn new(net: PolicyNet, name: impl Into<String>) -> Self {
        PolicyAgent { net, name: name.into() }
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }
}

impl Agent for PolicyAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn wants_image(&self) -> bool {
        true
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<Action> {
        if obs.state.is_forced_move_on() {
            return Ok(obs.config.void_action());
        }
        let image = obs
            .image
            .ok_or_else(|| Error::InvalidArgument("policy agent needs the state image".into()))?;
        let probs = self.net.forward(&image.to_f64())?;
        Ok(Action(argmax(&probs)))
    }
}
