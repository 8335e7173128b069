#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use schedlab::env::{Action, EnvConfig, JobResult, Objective, SchedulingEnv};
use schedlab::workload::{Job, Jobset, Mode};

/// Common multiple of every tiny-instance duration, so that
/// `Σ C_j / T_j` can be compared as an integer.
pub const SCALE: u64 = 60;
pub const TINY_R: u32 = 3;
pub const TINY_HORIZON: usize = 6;

pub fn tiny_config() -> EnvConfig {
    EnvConfig {
        mode: Mode::Online,
        r: TINY_R,
        time_horizon: TINY_HORIZON,
        num_slots: 4,
        backlog_capacity: 4,
        arrival_window: 4,
        objective: Objective::Slowdown,
        hard_step_cap: 1000,
        ..EnvConfig::default()
    }
}

/// Up to four jobs, durations 1..=6, demands in [1, 3], arrivals in 0..=3.
/// With `unit` every demand is [1, 1] and everything arrives at 0.
pub fn tiny_instance(rng: &mut ChaCha8Rng, seed: u64, unit: bool) -> Jobset {
    let n = rng.gen_range(1..=4);
    let mut arrivals: Vec<u32> = (0..n).map(|_| if unit { 0 } else { rng.gen_range(0..=3) }).collect();
    arrivals.sort_unstable();
    let jobs = arrivals
        .into_iter()
        .enumerate()
        .map(|(i, arrival_time)| Job {
            id: i as u32,
            arrival_time,
            duration: rng.gen_range(1..=TINY_HORIZON as u32),
            demand: if unit {
                [1, 1]
            } else {
                [rng.gen_range(1..=TINY_R), rng.gen_range(1..=TINY_R)]
            },
        })
        .collect();
    Jobset {
        seed,
        mode: Mode::Online,
        r: TINY_R,
        jobs,
        nominal_load: 0.0,
    }
}

/// `Σ_j C_j / T_j · SCALE` from the environment's own job results.
pub fn scaled_slowdown_sum(results: &[JobResult]) -> u64 {
    results
        .iter()
        .map(|j| u64::from(j.completion_time) * SCALE / u64::from(j.ideal))
        .sum()
}

/// Exhaustive search over action sequences by cloning the environment.
/// Returns the best total penalty `−Σ rewards` and one sequence reaching it.
/// Only distinct moves are branched on: each slot whose job can be placed,
/// and moving on.
pub fn search_optimum(jobset: &Jobset, config: &EnvConfig) -> (f64, Vec<Action>) {
    fn dfs(env: &SchedulingEnv, cost: f64, path: &mut Vec<Action>, best: &mut (f64, Vec<Action>)) {
        if env.is_done() {
            if cost < best.0 - 1e-9 {
                *best = (cost, path.clone());
            }
            return;
        }
        if cost >= best.0 - 1e-9 {
            return;
        }
        let state = env.state();
        let mut moves: Vec<Action> = state
            .slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.as_ref().is_some_and(|j| state.occupancy.earliest_fit(j).is_some()))
            .map(|(i, _)| Action(i))
            .collect();
        moves.push(env.config().void_action());
        for a in moves {
            let mut next = env.clone();
            let t = next.transition(a).expect("valid move");
            path.push(a);
            dfs(&next, cost - t.reward, path, best);
            path.pop();
        }
    }
    let mut env = SchedulingEnv::new(config.clone()).unwrap();
    env.reset_quiet(jobset).unwrap();
    let mut best = (f64::INFINITY, Vec::new());
    dfs(&env, 0.0, &mut Vec::new(), &mut best);
    best
}

/// Independent route: enumerate non-preemptive start times directly and
/// return the minimum of `Σ C_j / T_j · SCALE` over capacity-feasible
/// schedules. Any optimal schedule finishes by the last arrival plus the
/// total work, which bounds the start times.
pub fn schedule_optimum(jobset: &Jobset) -> u64 {
    let jobs = &jobset.jobs;
    if jobs.is_empty() {
        return 0;
    }
    let last_arrival = jobs.iter().map(|j| j.arrival_time).max().unwrap();
    let total: u32 = jobs.iter().map(|j| j.duration).sum();
    let limit = last_arrival + total;
    let mut starts = vec![0u32; jobs.len()];
    let mut best = u64::MAX;

    fn feasible(jobs: &[Job], starts: &[u32], r: u32, upto: usize) -> bool {
        let end = (0..upto).map(|i| starts[i] + jobs[i].duration).max().unwrap_or(0);
        (0..end).all(|t| {
            (0..2).all(|res| {
                let used: u32 = (0..upto)
                    .filter(|&i| starts[i] <= t && t < starts[i] + jobs[i].duration)
                    .map(|i| jobs[i].demand[res])
                    .sum();
                used <= r
            })
        })
    }

    fn rec(jobs: &[Job], i: usize, starts: &mut Vec<u32>, limit: u32, r: u32, best: &mut u64) {
        if i == jobs.len() {
            let v: u64 = jobs
                .iter()
                .zip(starts.iter())
                .map(|(j, &s)| u64::from(s + j.duration - j.arrival_time) * SCALE / u64::from(j.duration))
                .sum();
            *best = (*best).min(v);
            return;
        }
        for s in jobs[i].arrival_time..=limit {
            starts[i] = s;
            if feasible(jobs, starts, r, i + 1) {
                rec(jobs, i + 1, starts, limit, r, best);
            }
        }
    }

    rec(jobs, 0, &mut starts, limit, jobset.r, &mut best);
    best
}
