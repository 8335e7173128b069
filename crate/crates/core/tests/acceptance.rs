//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (bypassing the harness capture) before asserting.
//!
//! The trained runs are shared through `OnceLock`s, so criteria that use the
//! same seed train it once per test process.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use schedlab::baselines::{RandomAgent, SjfAgent};
use schedlab::config::{Pipeline, Preset, RunConfig};
use schedlab::env::{run_episode, run_episode_in, Objective, SchedulingEnv};
use schedlab::eval::{
    paired_less, run_sweep, slowdown_by_duration, summarize_curve, AgentFactory, CurveSummary, SweepReport, SweepSpec,
};
use schedlab::nn::PolicyNet;
use schedlab::pipeline::{train, TrainOptions, TrainSummary};
use schedlab::seeds::{derive_seed, rng_for, SeedSpace};
use schedlab::selftest::{bandit_run, gradient_check_seed, returns_oracle_error, GRAD_TOLERANCE};
use schedlab::workload::{generate_jobset, Mode};

use common::{schedule_optimum, scaled_slowdown_sum, search_optimum, tiny_config, tiny_instance};

fn report(id: u32, name: &str, passed: bool, detail: &str, started: Instant) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {id:>2} {verdict} {name} ({:.1}s): {detail}\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn run_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

struct DeskRun {
    config: RunConfig,
    summary: TrainSummary,
}

/// Desk preset, bc-then-pg, slowdown objective, load 0.9.
fn desk_run(seed: u64) -> &'static DeskRun {
    static RUNS: [OnceLock<DeskRun>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    RUNS[seed as usize].get_or_init(|| {
        let mut config = RunConfig::preset(Preset::Desk);
        config.seed = seed;
        config.load = Some(0.9);
        config.train.pipeline = Pipeline::BcThenPg;
        config.env.objective = Objective::Slowdown;
        let summary = train(&config, &run_dir(&format!("desk_seed{seed}")), TrainOptions::default()).unwrap();
        DeskRun {
            config: config.resolved().unwrap(),
            summary,
        }
    })
}

fn training_seeds(config: &RunConfig) -> Vec<u64> {
    let mut seeds = config.train_jobset_seeds();
    seeds.extend(config.demo_jobset_seeds());
    seeds
}

/// Held-out sweep of `agents` over `loads` on the run's environment.
fn held_out(config: &RunConfig, loads: &[f64], agents: Vec<AgentFactory>, seeds: usize) -> SweepReport {
    run_sweep(&SweepSpec {
        env: config.env.clone(),
        workload: config.workload.clone(),
        loads: loads.to_vec(),
        agents,
        seeds_per_cell: seeds,
        base_seed: config.seed,
        gamma: config.train.gamma,
        training_seeds: training_seeds(config),
    })
    .unwrap()
}

fn policy(name: &str, net: &PolicyNet) -> AgentFactory {
    AgentFactory::Policy {
        name: name.into(),
        net: net.clone(),
    }
}

#[test]
fn criterion_01_environment_safety_fuzz() {
    let started = Instant::now();
    // Paper scale: every one of these loads is reachable there.
    let config = RunConfig::preset(Preset::Paper).resolved().unwrap();
    let loads = [0.7, 1.1, 1.9];
    let per_load = 10_000usize.div_ceil(loads.len());
    let outcomes: Vec<Result<(usize, usize), String>> = loads
        .iter()
        .enumerate()
        .flat_map(|(li, &load)| (0..per_load).map(move |i| (li, load, i)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(li, load, i)| {
            let workload = config.workload.with_load(load);
            let seed = derive_seed(1, SeedSpace::EvalJobsets, &[li as u64, i as u64]);
            let jobset = generate_jobset(&workload, Mode::Online, seed).map_err(|e| e.to_string())?;
            let mut env = SchedulingEnv::new(config.env.clone()).map_err(|e| e.to_string())?;
            env.set_checked(true);
            let mut agent = RandomAgent::new(rng_for(1, SeedSpace::Agent, &[li as u64, i as u64]));
            let rec = run_episode_in(&mut env, &jobset, &mut agent, false).map_err(|e| format!("seed {seed}: {e}"))?;
            if rec.results.len() + rec.dropped != jobset.len() {
                return Err(format!("seed {seed}: job count not conserved"));
            }
            if let Some(j) = rec.results.iter().find(|j| !j.censored && j.slowdown() < 1.0) {
                return Err(format!("seed {seed}: job {} has slowdown {}", j.id, j.slowdown()));
            }
            Ok((rec.results.len(), rec.steps()))
        })
        .collect();
    let failures: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let jobs: usize = outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|o| o.0).sum();
    let seconds = started.elapsed().as_secs_f64();
    let passed = failures.is_empty() && seconds < 120.0;
    report(
        1,
        "environment safety fuzz",
        passed,
        &format!(
            "{} episodes, {jobs} jobs, {} violations; first: {:?}",
            outcomes.len(),
            failures.len(),
            failures.first()
        ),
        started,
    );
    assert!(passed);
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[test]
fn criterion_02_reward_metric_identity() {
    let started = Instant::now();
    let config = RunConfig::preset(Preset::Desk).resolved().unwrap();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut attempt = 0u64;
    while checked < 100 {
        attempt += 1;
        assert!(attempt < 10_000, "could not find 100 complete episodes");
        let mut rng = rng_for(2, SeedSpace::Shuffle, &[attempt]);
        let load = rng.gen_range(0.2..1.0);
        let jobset = generate_jobset(&config.workload.with_load(load), Mode::Online, attempt).unwrap();
        let mut agent = RandomAgent::new(rng_for(2, SeedSpace::Agent, &[attempt]));
        let rec = run_episode(&jobset, &config.env, &mut agent, false).unwrap();
        if rec.dropped > 0 || rec.censored() > 0 || rec.results.is_empty() {
            continue;
        }
        let penalty = -rec.total_reward();
        let slowdowns: f64 = rec.results.iter().map(|j| j.slowdown()).sum();
        // Exact rational form over the common denominator of the durations:
        // each job contributes C_j / T_j.
        let lcm = rec.results.iter().fold(1u64, |l, j| lcm(l, u64::from(j.ideal)));
        let numerator: u64 = rec
            .results
            .iter()
            .map(|j| u64::from(j.completion_time) * (lcm / u64::from(j.ideal)))
            .sum();
        worst = worst.max((penalty - slowdowns).abs());
        worst = worst.max((penalty - numerator as f64 / lcm as f64).abs());
        checked += 1;
    }
    let passed = worst <= 1e-9;
    report(
        2,
        "reward-metric identity",
        passed,
        &format!("{checked} episodes, max |-sum r - sum S| = {worst:.1e}"),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_03_gradient_correctness() {
    let started = Instant::now();
    let errors: Vec<f64> = (0..6).map(|seed| gradient_check_seed(seed, None).unwrap()).collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let passed = worst < GRAD_TOLERANCE && started.elapsed().as_secs_f64() < 60.0;
    report(
        3,
        "gradient correctness",
        passed,
        &format!("{} networks, both heads, max relative error {worst:.2e}", errors.len()),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_04_returns_oracle() {
    let started = Instant::now();
    let err = returns_oracle_error(1000, 4);
    let passed = err <= 1e-12;
    report(4, "returns oracle", passed, &format!("1000 sequences, max deviation {err:.1e}"), started);
    assert!(passed);
}

#[test]
fn criterion_05_bandit_sanity() {
    let started = Instant::now();
    let runs: Vec<(Option<usize>, f64)> = (0..10).map(|s| bandit_run(s, 200).unwrap()).collect();
    let solved = runs.iter().filter(|r| r.0.is_some()).count();
    let slowest = runs.iter().filter_map(|r| r.0).max().unwrap_or(0);
    let passed = solved == 10;
    report(
        5,
        "bandit policy gradient",
        passed,
        &format!("{solved}/10 seeds past P=0.9, slowest at epoch {slowest}"),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_06_behavior_cloning() {
    let started = Instant::now();
    let run = desk_run(0);
    let bc = run.summary.bc.as_ref().expect("bc stage ran");
    let accuracy = bc.history[bc.best_epoch].validation_accuracy;
    let demos = bc.train_examples + bc.validation_examples;
    let bc_net = schedlab::nn::load_policy(&run.summary.out_dir.join("checkpoints/bc_final.json")).unwrap();
    let sweep = held_out(&run.config, &[0.7], vec![AgentFactory::Sjf, policy("bc", &bc_net)], 50);
    let sjf = sweep.cell(0.7, "sjf").unwrap().pooled_slowdown;
    let cloned = sweep.cell(0.7, "bc").unwrap().pooled_slowdown;
    let passed = demos >= 5000 && accuracy >= 0.8 && cloned <= 1.2 * sjf;
    report(
        6,
        "behavior cloning reproduces SJF",
        passed,
        &format!(
            "{demos} demonstrations, validation accuracy {accuracy:.3}, slowdown {cloned:.3} vs SJF {sjf:.3} (ratio {:.3})",
            cloned / sjf
        ),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_07_heuristic_ordering() {
    let started = Instant::now();
    let mut config = RunConfig::preset(Preset::Paper).resolved().unwrap();
    config.seed = 7;
    let loads = [0.7, 0.9, 1.1, 1.3];
    let sweep = held_out(&config, &loads, vec![AgentFactory::Sjf, AgentFactory::Random], 200);
    let mut passed = true;
    let mut parts = Vec::new();
    for load in loads {
        let t = paired_less(&sweep.slowdowns(load, "sjf"), &sweep.slowdowns(load, "random")).unwrap();
        passed &= t.significant(0.05);
        parts.push(format!(
            "{load}: {:.2} vs {:.2} p={:.1e}",
            sweep.cell(load, "sjf").unwrap().mean_slowdown,
            sweep.cell(load, "random").unwrap().mean_slowdown,
            t.p_value
        ));
    }
    report(7, "SJF below Random", passed, &parts.join("; "), started);
    assert!(passed);
}

struct SeedOutcome {
    passed: bool,
    line: String,
}

fn learning_outcome(seed: u64) -> SeedOutcome {
    let run = desk_run(seed);
    let curve: CurveSummary = summarize_curve(&run.summary.metrics).unwrap();
    let sweep = held_out(&run.config, &[0.9], vec![AgentFactory::Sjf, policy("pg", &run.summary.policy)], 50);
    let sjf = sweep.cell(0.9, "sjf").unwrap().pooled_slowdown;
    let learned = sweep.cell(0.9, "pg").unwrap().pooled_slowdown;
    let ratio = learned / sjf;
    let passed = ratio <= 1.05 && curve.reward_trend() > 0.0;
    SeedOutcome {
        passed,
        line: format!(
            "seed {seed}: slowdown {learned:.3} vs SJF {sjf:.3} (ratio {ratio:.3}{}), reward {:.2} -> {:.2}",
            if ratio < 1.0 { ", below SJF" } else { "" },
            curve.first_quartile.mean_discounted_reward,
            curve.last_quartile.mean_discounted_reward
        ),
    }
}

#[test]
fn criterion_08_learning_matches_the_teacher() {
    let started = Instant::now();
    let outcomes: Vec<SeedOutcome> = (0..4).map(learning_outcome).collect();
    let passes = outcomes.iter().filter(|o| o.passed).count();
    let passed = passes >= 3;
    let detail = outcomes.iter().map(|o| o.line.as_str()).collect::<Vec<_>>().join("; ");
    report(8, "learned policy vs SJF", passed, &format!("{passes}/4 seeds pass; {detail}"), started);
    assert!(passed);
}

#[test]
fn criterion_09_offline_variant_trains() {
    let started = Instant::now();
    let mut config = RunConfig::preset(Preset::Desk);
    config.seed = 9;
    config.env.mode = Mode::Offline;
    config.env.objective = Objective::CompletionTime;
    config.train.pipeline = Pipeline::Pg;
    // The trend is already clear by 40 epochs and each offline epoch costs ~15 s on one core.
    config.train.epochs = 40;
    let summary = train(&config, &run_dir("desk_offline"), TrainOptions::default()).unwrap();
    let config = config.resolved().unwrap();
    let curve = summarize_curve(&summary.metrics).unwrap();
    let sweep = held_out(&config, &[0.9], vec![AgentFactory::Random, policy("pg", &summary.policy)], 50);
    let random = sweep.cell(0.9, "random").unwrap();
    let learned = sweep.cell(0.9, "pg").unwrap();
    let passed = curve.reward_trend() > 0.0
        && learned.censored_episodes == 0
        && random.censored_episodes == 0
        && learned.mean_makespan <= random.mean_makespan;
    report(
        9,
        "offline completion-time training",
        passed,
        &format!(
            "{} jobs per jobset, reward {:.2} -> {:.2}, makespan {:.2} vs Random {:.2}",
            config.env.num_slots,
            curve.first_quartile.mean_discounted_reward,
            curve.last_quartile.mean_discounted_reward,
            learned.mean_makespan,
            random.mean_makespan
        ),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_10_short_jobs_benefit() {
    let started = Instant::now();
    let run = desk_run(0);
    let sweep = held_out(&run.config, &[1.1], vec![AgentFactory::Random, policy("pg", &run.summary.policy)], 100);
    let buckets = |agent: &str| slowdown_by_duration(sweep.records(1.1, agent).unwrap());
    let learned = buckets("pg");
    let random = buckets("random");
    let mut passed = true;
    let mut parts = Vec::new();
    for d in 1..=3 {
        let a = learned.iter().find(|b| b.duration == d);
        let b = random.iter().find(|b| b.duration == d);
        match (a, b) {
            (Some(a), Some(b)) => {
                passed &= a.quartiles.median < b.quartiles.median;
                parts.push(format!(
                    "T={d}: median {:.2} vs Random {:.2} ({} / {} jobs)",
                    a.quartiles.median, b.quartiles.median, a.count, b.count
                ));
            }
            _ => {
                passed = false;
                parts.push(format!("T={d}: no finished jobs"));
            }
        }
    }
    report(10, "short jobs gain most", passed, &parts.join("; "), started);
    assert!(passed);
}

#[test]
fn criterion_11_brute_force_oracle() {
    let started = Instant::now();
    let config = tiny_config();
    let mut rng = rng_for(11, SeedSpace::Shuffle, &[]);
    let mut mismatches = Vec::new();
    let mut optimal_below_sjf = 0;
    for i in 0..50 {
        let jobset = tiny_instance(&mut rng, i, false);
        let (cost, actions) = search_optimum(&jobset, &config);
        let oracle = schedule_optimum(&jobset);
        // Replay the best action sequence and read the metrics back.
        let mut env = SchedulingEnv::new(config.clone()).unwrap();
        env.set_checked(true);
        env.reset_quiet(&jobset).unwrap();
        let mut penalty = 0.0;
        for a in &actions {
            penalty -= env.transition(*a).unwrap().reward;
        }
        assert!(env.is_done());
        let replayed = scaled_slowdown_sum(&env.state().finished);
        if replayed != oracle || (penalty - oracle as f64 / common::SCALE as f64).abs() > 1e-9 {
            mismatches.push(format!("instance {i}: search {cost} replay {replayed} schedules {oracle}"));
        }
        let sjf = run_episode(&jobset, &config, &mut SjfAgent, false).unwrap();
        if scaled_slowdown_sum(&sjf.results) > oracle {
            optimal_below_sjf += 1;
        }
    }
    let mut sjf_gaps = Vec::new();
    for i in 0..50 {
        let jobset = tiny_instance(&mut rng, 100 + i, true);
        let oracle = schedule_optimum(&jobset);
        let sjf = run_episode(&jobset, &config, &mut SjfAgent, false).unwrap();
        let got = scaled_slowdown_sum(&sjf.results);
        if got != oracle {
            sjf_gaps.push(format!("unit instance {i}: SJF {got} optimum {oracle}"));
        }
    }
    let passed = mismatches.is_empty() && sjf_gaps.is_empty();
    let mut detail = format!(
        "50 instances: {} mismatches (SJF suboptimal on {optimal_below_sjf}); 50 unit-demand instances: SJF off optimum on {}",
        mismatches.len(),
        sjf_gaps.len()
    );
    if let Some(first) = mismatches.iter().chain(&sjf_gaps).next() {
        detail.push_str("; first: ");
        detail.push_str(first);
    }
    report(
        11,
        "brute-force scheduling oracle",
        passed,
        &detail,
        started,
    );
    assert!(passed);
}
