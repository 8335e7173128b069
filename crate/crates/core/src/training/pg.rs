use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::returns::{compute_returns, time_baseline};
use super::rollout::{sample_action, RolloutEnv};
use crate::error::{Error, Result};
use crate::nn::{entropy, log_prob_logit_grad, Direction, OptimizerState, PolicyNet, Trace};
use crate::seeds::{rng_for, SeedSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgSettings {
    pub gamma: f64,
    /// Monte Carlo rollouts per task (jobset).
    pub rollouts: usize,
    /// Base seed for rollout sampling streams.
    pub seed: u64,
    /// Per-task memory allowed for cached forward traces; steps beyond it are
    /// recomputed during the backward pass.
    pub trace_budget_bytes: usize,
}

impl PgSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if self.rollouts < 2 {
            return Err(Error::config("the baseline needs at least two rollouts per jobset"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub rollouts: usize,
    pub steps: usize,
    /// Steps where the policy was sampled (not forced).
    pub policy_steps: usize,
    pub mean_discounted_reward: f64,
    pub max_discounted_reward: f64,
    /// NaN when no rollout finished a job.
    pub mean_slowdown: f64,
    /// Mean policy entropy over sampled steps.
    pub entropy: f64,
    pub grad_norm: f64,
    pub updated: bool,
}

struct PolicyStep {
    t: usize,
    action: usize,
    trace: Option<Trace>,
    input: Option<Vec<f64>>,
}

struct Rollout {
    rewards: Vec<f64>,
    steps: Vec<PolicyStep>,
    slowdown: Option<f64>,
}

struct TaskOutcome {
    grads: Vec<f64>,
    discounted: Vec<f64>,
    slowdowns: Vec<f64>,
    entropy_sum: f64,
    policy_steps: usize,
    steps: usize,
}

fn trace_bytes(net: &PolicyNet) -> usize {
    let acts: usize = net.arch.shapes().iter().map(|s| s.iter().product::<usize>()).sum();
    (net.arch.input_len() + acts + net.num_actions()) * std::mem::size_of::<f64>()
}

fn run_task<E, F>(
    net: &PolicyNet,
    make_env: &F,
    task: usize,
    epoch: usize,
    settings: &PgSettings,
) -> Result<TaskOutcome>
where
    E: RolloutEnv,
    F: Fn(usize) -> Result<E> + Sync,
{
    let per_trace = trace_bytes(net);
    let mut budget = settings.trace_budget_bytes;
    let mut entropy_sum = 0.0;
    let mut rollouts = Vec::with_capacity(settings.rollouts);
    let mut input = Vec::new();
    for n in 0..settings.rollouts {
        let mut rng = rng_for(settings.seed, SeedSpace::Rollouts, &[epoch as u64, task as u64, n as u64]);
        let mut env = make_env(task)?;
        if env.num_actions() != net.num_actions() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} policy outputs", env.num_actions()),
                got: format!("{}", net.num_actions()),
            });
        }
        let mut rewards = Vec::new();
        let mut steps = Vec::new();
        while !env.is_done() {
            let t = rewards.len();
            if env.is_forced() {
                rewards.push(env.act(env.forced_action())?);
                continue;
            }
            env.observe(&mut input);
            let trace = net.forward_trace(&input)?;
            let action = sample_action(trace.probs(), &mut rng);
            entropy_sum += entropy(trace.probs());
            let step = if budget >= per_trace {
                budget -= per_trace;
                PolicyStep {
                    t,
                    action,
                    trace: Some(trace),
                    input: None,
                }
            } else {
                PolicyStep {
                    t,
                    action,
                    trace: None,
                    input: Some(input.clone()),
                }
            };
            steps.push(step);
            rewards.push(env.act(action)?);
        }
        rollouts.push(Rollout {
            rewards,
            steps,
            slowdown: env.mean_slowdown(),
        });
    }

    let returns: Vec<Vec<f64>> = rollouts
        .iter()
        .map(|r| compute_returns(&r.rewards, settings.gamma))
        .collect();
    let baseline = time_baseline(&returns);
    let mut grads = vec![0.0; net.num_params()];
    let mut policy_steps = 0;
    for (rollout, v) in rollouts.iter().zip(&returns) {
        policy_steps += rollout.steps.len();
        for step in &rollout.steps {
            let advantage = v[step.t] - baseline[step.t];
            if advantage == 0.0 {
                continue;
            }
            let recomputed;
            let trace = match (&step.trace, &step.input) {
                (Some(trace), _) => trace,
                (None, Some(input)) => {
                    recomputed = net.forward_trace(input)?;
                    &recomputed
                }
                (None, None) => unreachable!("policy step keeps either its trace or its input"),
            };
            let dlogits = log_prob_logit_grad(trace.probs(), step.action, advantage);
            net.backward_into(trace, &dlogits, &mut grads)?;
        }
    }
    Ok(TaskOutcome {
        grads,
        discounted: returns.iter().map(|v| v.first().copied().unwrap_or(0.0)).collect(),
        slowdowns: rollouts.iter().filter_map(|r| r.slowdown).collect(),
        entropy_sum,
        policy_steps,
        steps: rollouts.iter().map(|r| r.rewards.len()).sum(),
    })
}

/// Runs `settings.rollouts` sampled rollouts for each of `tasks` tasks and
/// returns the summed policy gradient `Σ ∇ log π(a_t|s_t) (v_t − b_t)`.
///
/// Tasks run in parallel, but their gradients are added in task order so
/// the result does not depend on the thread count.
pub fn pg_gradient<E, F>(
    net: &PolicyNet,
    tasks: usize,
    make_env: F,
    settings: &PgSettings,
    epoch: usize,
) -> Result<(Vec<f64>, EpochStats)>
where
    E: RolloutEnv,
    F: Fn(usize) -> Result<E> + Sync,
{
    settings.validate()?;
    if tasks == 0 {
        return Err(Error::InvalidArgument("an epoch needs at least one task".into()));
    }
    let mut grads = vec![0.0; net.num_params()];
    let mut discounted = Vec::with_capacity(tasks * settings.rollouts);
    let mut slowdowns = Vec::new();
    let mut entropy_sum = 0.0;
    let mut policy_steps = 0;
    let mut steps = 0;
    // Bounded batches keep at most a few gradient vectors alive at once.
    let batch = 2 * rayon::current_num_threads().max(1);
    let indices: Vec<usize> = (0..tasks).collect();
    for chunk in indices.chunks(batch) {
        let outcomes: Vec<Result<TaskOutcome>> = chunk
            .par_iter()
            .map(|&task| run_task(net, &make_env, task, epoch, settings))
            .collect();
        for outcome in outcomes {
            let o = outcome?;
            for (g, x) in grads.iter_mut().zip(&o.grads) {
                *g += x;
            }
            discounted.extend(o.discounted);
            slowdowns.extend(o.slowdowns);
            entropy_sum += o.entropy_sum;
            policy_steps += o.policy_steps;
            steps += o.steps;
        }
    }
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let stats = EpochStats {
        epoch,
        rollouts: discounted.len(),
        steps,
        policy_steps,
        mean_discounted_reward: mean(&discounted),
        max_discounted_reward: discounted.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_slowdown: mean(&slowdowns),
        entropy: if policy_steps == 0 {
            0.0
        } else {
            entropy_sum / policy_steps as f64
        },
        grad_norm: grads.iter().map(|g| g * g).sum::<f64>().sqrt(),
        updated: false,
    };
    Ok((grads, stats))
}

/// One policy-gradient epoch: gradient over all tasks, then a single ascent
/// step. A non-finite gradient skips the step and is reported through
/// `stats.updated`.
pub fn pg_epoch<E, F>(
    net: &mut PolicyNet,
    optimizer: &mut OptimizerState,
    tasks: usize,
    make_env: F,
    settings: &PgSettings,
    epoch: usize,
) -> Result<EpochStats>
where
    E: RolloutEnv,
    F: Fn(usize) -> Result<E> + Sync,
{
    let (grads, mut stats) = pg_gradient(net, tasks, make_env, settings, epoch)?;
    match optimizer.apply_update(&mut net.params, &grads, Direction::Ascent) {
        Ok(()) => stats.updated = true,
        Err(Error::NonFinite(what)) => log::warn!("epoch {epoch}: update skipped, non-finite {what}"),
        Err(e) => return Err(e),
    }
    Ok(stats)
}
