//! Quick built-in checks: gradient correctness, environment safety under
//! random play, the returns recursion, and policy-gradient learning on a
//! two-armed bandit.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::RandomAgent;
use crate::config::{Preset, RunConfig};
use crate::env::{run_episode_in, SchedulingEnv};
use crate::error::Result;
use crate::nn::{grad_check, Activation, Architecture, CnnWidths, Head, LayerSpec, OptimizerState, PolicyNet};
use crate::seeds::{derive_seed, rng_for, SeedSpace};
use crate::training::{compute_returns, pg_epoch, BanditEnv, PgSettings};
use crate::workload::generate_jobset;

pub const GRAD_TOLERANCE: f64 = 1e-4;
// Small enough that perturbations rarely straddle a ReLU kink.
const GRAD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelfTestOptions {
    /// Flip the sign of one layer's parameter gradient to confirm the
    /// gradient check notices.
    pub inject_fault: Option<usize>,
    /// Random-action episodes per load in the environment fuzz.
    pub fuzz_episodes: usize,
}

/// A reduced network with the layer structure of the full policy.
pub fn small_cnn(rows: usize, cols: usize, actions: usize) -> Architecture {
    Architecture::cnn(
        rows,
        cols,
        actions,
        CnnWidths {
            conv1: 2,
            conv2: 3,
            kernel: 3,
            hidden: 6,
        },
    )
}

/// Worst relative error of both loss heads on one random small network.
pub fn gradient_check_seed(seed: u64, fault: Option<usize>) -> Result<f64> {
    let mut rng = rng_for(seed, SeedSpace::Init, &[0xc0ffee]);
    let rows = rng.gen_range(4..=8);
    let cols = rng.gen_range(6..=14);
    let actions = rng.gen_range(2..=6);
    let mut net = PolicyNet::init(small_cnn(rows, cols, actions), &mut rng)?;
    // Nonzero biases exercise the bias gradients too.
    for p in net.params.iter_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    net.fault = fault;
    let input: Vec<f64> = (0..rows * cols).map(|_| f64::from(rng.gen_bool(0.4) as u8)).collect();
    let heads = [
        Head::CrossEntropy {
            target: rng.gen_range(0..actions),
        },
        Head::LogProb {
            action: rng.gen_range(0..actions),
            weight: rng.gen_range(-2.0..2.0),
        },
    ];
    let mut worst: f64 = 0.0;
    for head in heads {
        let report = grad_check(&net, &input, head, GRAD_STEP, GRAD_TOLERANCE)?;
        worst = worst.max(report.max_rel_error);
    }
    Ok(worst)
}

/// Trains a one-layer softmax policy on a +1/−1 bandit and returns the
/// epoch at which the +1 arm passed probability 0.9, if it did within
/// `max_epochs`.
pub fn bandit_run(seed: u64, max_epochs: usize) -> Result<(Option<usize>, f64)> {
    let arch = Architecture {
        input: [1, 1, 1],
        layers: vec![LayerSpec::Dense {
            outputs: 2,
            activation: Activation::Identity,
        }],
    };
    let mut net = PolicyNet::zeros(arch)?;
    let mut optimizer = OptimizerState::rmsprop(net.num_params(), 0.01);
    let settings = PgSettings {
        gamma: 1.0,
        rollouts: 10,
        seed,
        trace_budget_bytes: 1 << 20,
    };
    let mut p = net.forward(&[1.0])?[0];
    for epoch in 0..max_epochs {
        pg_epoch(&mut net, &mut optimizer, 1, |_| BanditEnv::new(vec![1.0, -1.0]), &settings, epoch)?;
        p = net.forward(&[1.0])?[0];
        if p > 0.9 {
            return Ok((Some(epoch + 1), p));
        }
    }
    Ok((None, p))
}

/// Largest deviation between the returns recursion and direct summation.
pub fn returns_oracle_error(sequences: usize, seed: u64) -> f64 {
    let mut rng = rng_for(seed, SeedSpace::Shuffle, &[0x7e7]);
    let mut worst: f64 = 0.0;
    for _ in 0..sequences {
        let len = rng.gen_range(1..=100);
        let gamma = rng.gen_range(0.01..=1.0);
        let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let v = compute_returns(&rewards, gamma);
        for t in 0..len {
            let direct: f64 = (t..len).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
            worst = worst.max((v[t] - direct).abs());
        }
    }
    worst
}

/// Random-action episodes on the desk preset with invariant checking on.
/// Returns the number of episodes run.
pub fn env_fuzz(loads: &[f64], episodes: usize, seed: u64) -> Result<usize> {
    let base = RunConfig::preset(Preset::Desk).resolved()?;
    let mut env = SchedulingEnv::new(base.env.clone())?;
    env.set_checked(true);
    let mut count = 0;
    for (li, &load) in loads.iter().enumerate() {
        let workload = base.workload.clone().with_load(load);
        for i in 0..episodes {
            let js = generate_jobset(
                &workload,
                base.env.mode,
                derive_seed(seed, SeedSpace::EvalJobsets, &[li as u64, i as u64]),
            )?;
            let mut agent = RandomAgent::new(rng_for(seed, SeedSpace::Agent, &[li as u64, i as u64]));
            let rec = run_episode_in(&mut env, &js, &mut agent, false)?;
            if rec.results.iter().any(|r| r.slowdown() < 1.0) {
                return Err(crate::Error::InvariantViolation(format!("slowdown below 1 in jobset {}", js.seed)));
            }
            count += 1;
        }
    }
    Ok(count)
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_selftest(options: SelfTestOptions) -> SelfTestReport {
    let mut checks = Vec::new();
    checks.push(timed("gradient check", || {
        let mut worst: f64 = 0.0;
        for seed in 0..5 {
            worst = worst.max(gradient_check_seed(seed, options.inject_fault)?);
        }
        Ok((
            worst < GRAD_TOLERANCE,
            format!("max relative error {worst:.2e} over 5 networks, both heads"),
        ))
    }));
    checks.push(timed("environment fuzz", || {
        let episodes = options.fuzz_episodes.max(1);
        let n = env_fuzz(&[0.7, 1.1, 1.9], episodes, 0)?;
        Ok((true, format!("{n} random-action episodes without invariant violations")))
    }));
    checks.push(timed("returns oracle", || {
        let err = returns_oracle_error(1000, 0);
        Ok((err <= 1e-12, format!("max deviation {err:.1e} over 1000 sequences")))
    }));
    checks.push(timed("bandit policy gradient", || {
        let mut worst = 0;
        for seed in 0..10 {
            match bandit_run(seed, 200)? {
                (Some(e), _) => worst = worst.max(e),
                (None, p) => return Ok((false, format!("seed {seed}: P(+1) = {p:.3} after 200 epochs"))),
            }
        }
        Ok((true, format!("all 10 seeds past 0.9 by epoch {worst}")))
    }));
    SelfTestReport { checks }
}
