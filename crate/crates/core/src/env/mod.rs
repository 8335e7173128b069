//! The scheduling MDP.
//!
//! An action either allocates the job in a slot at its earliest feasible
//! offset (the clock stays put, reward 0) or triggers a "Move on": the clock
//! advances one step, the occupancy grid shifts up a row, finished jobs are
//! retired, arrivals surface, and the per-timestep reward is emitted.

mod episode;
mod image;
mod occupancy;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use episode::{run_episode, run_episode_in, Agent, EpisodeRecord, Observation};
pub use image::{render_image, ImageLayout, StateImage};
pub use occupancy::Occupancy;

use crate::error::{Error, Result};
use crate::workload::{Job, Jobset, Mode, NUM_RESOURCES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Slowdown,
    CompletionTime,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slowdown" => Ok(Objective::Slowdown),
            "completion_time" | "completion-time" => Ok(Objective::CompletionTime),
            other => Err(Error::InvalidArgument(format!("unknown objective '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub mode: Mode,
    pub r: u32,
    pub num_resources: usize,
    /// Rows of visible cluster future.
    pub time_horizon: usize,
    pub num_slots: usize,
    pub backlog_capacity: usize,
    pub arrival_window: u32,
    pub objective: Objective,
    pub hard_step_cap: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            mode: Mode::Online,
            r: 20,
            num_resources: NUM_RESOURCES,
            time_horizon: 20,
            num_slots: 10,
            backlog_capacity: 60,
            arrival_window: 50,
            objective: Objective::Slowdown,
            hard_step_cap: 1000,
        }
    }
}

impl EnvConfig {
    /// Offline variant: one slot per job and no backlog.
    pub fn offline(num_jobs: usize, base: &EnvConfig) -> Self {
        EnvConfig {
            mode: Mode::Offline,
            num_slots: num_jobs,
            backlog_capacity: 0,
            ..base.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_resources != NUM_RESOURCES {
            return Err(Error::config(format!("num_resources must be {NUM_RESOURCES}")));
        }
        if self.r == 0 || self.time_horizon == 0 || self.num_slots == 0 || self.hard_step_cap == 0 {
            return Err(Error::config("r, time_horizon, num_slots and hard_step_cap must be positive"));
        }
        if self.mode == Mode::Offline && self.backlog_capacity != 0 {
            return Err(Error::config("offline environments have no backlog"));
        }
        if self.mode == Mode::Online && self.arrival_window == 0 {
            return Err(Error::config("online environments need a positive arrival_window"));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.num_slots + 1
    }

    pub fn void_action(&self) -> Action {
        Action(self.num_slots)
    }

    pub fn layout(&self) -> ImageLayout {
        ImageLayout::of(self)
    }
}

/// Index of a slot, or `num_slots` for the explicit void action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub id: u32,
    pub arrival_time: u32,
    pub start_time: Option<u32>,
    /// Completion time measured from arrival (`C_j`).
    pub completion_time: u32,
    /// Ideal completion time, the job's duration (`T_j`).
    pub ideal: u32,
    /// Unfinished when the step cap hit; `completion_time` is measured at the cap.
    pub censored: bool,
}

impl JobResult {
    pub fn slowdown(&self) -> f64 {
        self.completion_time as f64 / self.ideal as f64
    }

    /// Absolute timestep at which the job completed.
    pub fn completed_at(&self) -> u32 {
        self.arrival_time + self.completion_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningJob {
    pub job: Job,
    pub start_time: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub clock: u32,
    pub occupancy: Occupancy,
    pub slots: Vec<Option<Job>>,
    pub backlog: VecDeque<Job>,
    pub pending: VecDeque<Job>,
    pub running: Vec<RunningJob>,
    pub finished: Vec<JobResult>,
    pub dropped: usize,
}

impl EnvState {
    fn empty(config: &EnvConfig) -> Self {
        EnvState {
            clock: 0,
            occupancy: Occupancy::new(config.time_horizon, config.r as usize),
            slots: vec![None; config.num_slots],
            backlog: VecDeque::new(),
            pending: VecDeque::new(),
            running: Vec::new(),
            finished: Vec::new(),
            dropped: 0,
        }
    }

    /// True when the job in `slot` can start now and run its full duration.
    pub fn fits_now(&self, slot: usize) -> bool {
        self.slots
            .get(slot)
            .and_then(|s| s.as_ref())
            .is_some_and(|job| self.occupancy.fits_at(job, 0))
    }

    /// True when no action can allocate anything, so every action moves on.
    pub fn is_forced_move_on(&self) -> bool {
        self.slots
            .iter()
            .flatten()
            .all(|job| self.occupancy.earliest_fit(job).is_none())
    }

    pub fn waiting(&self) -> usize {
        self.slots.iter().flatten().count() + self.backlog.len()
    }

    /// Jobs in the system: running plus waiting in slots or backlog.
    pub fn in_system(&self) -> impl Iterator<Item = &Job> {
        self.running
            .iter()
            .map(|r| &r.job)
            .chain(self.slots.iter().flatten())
            .chain(self.backlog.iter())
    }

    pub fn reward(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Slowdown => -self.in_system().map(|j| 1.0 / j.duration as f64).sum::<f64>(),
            Objective::CompletionTime => -(self.in_system().count() as f64),
        }
    }

    pub fn job_count(&self) -> usize {
        self.pending.len()
            + self.backlog.len()
            + self.slots.iter().flatten().count()
            + self.running.len()
            + self.finished.len()
            + self.dropped
    }

    /// Verifies capacity safety, non-preemption of running jobs and basic
    /// result sanity. `total` is the number of jobs in the episode.
    pub fn check_invariants(&self, total: usize) -> std::result::Result<(), String> {
        let occ = &self.occupancy;
        let horizon = occ.horizon();
        for k in 0..NUM_RESOURCES {
            for row in 0..horizon {
                let counted = occ.count_row(k, row);
                if counted > occ.capacity() || counted != occ.used(k, row) as usize {
                    return Err(format!(
                        "resource {k} row {row}: {counted} cells, tracked {}",
                        occ.used(k, row)
                    ));
                }
            }
        }
        let mut held = 0usize;
        for run in &self.running {
            let job = &run.job;
            let end = run.start_time + job.duration;
            if end <= self.clock {
                return Err(format!("job {} should have finished", job.id));
            }
            for row in 0..horizon {
                let t = self.clock + row as u32;
                let active = t >= run.start_time && t < end;
                for k in 0..NUM_RESOURCES {
                    let cells = occ.cells_held(k, row, job.id);
                    let want = if active { job.demand[k] as usize } else { 0 };
                    if cells != want {
                        return Err(format!(
                            "job {} holds {cells} cells of resource {k} at row {row}, expected {want}",
                            job.id
                        ));
                    }
                    held += cells;
                }
            }
        }
        let occupied: usize = (0..NUM_RESOURCES)
            .flat_map(|k| (0..horizon).map(move |row| (k, row)))
            .map(|(k, row)| occ.count_row(k, row))
            .sum();
        if occupied != held {
            return Err(format!("{occupied} occupied cells but running jobs hold {held}"));
        }
        if self.job_count() != total {
            return Err(format!("job count {} != {total}", self.job_count()));
        }
        for res in &self.finished {
            if !res.censored && res.completion_time < res.ideal {
                return Err(format!("job {} finished with slowdown < 1", res.id));
            }
            if let Some(start) = res.start_time {
                if start < res.arrival_time {
                    return Err(format!("job {} started before arrival", res.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub valid_action: bool,
    pub finished_this_step: usize,
    pub dropped: usize,
}

/// Result of one action without the rendered image.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub time_advanced: bool,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub image: StateImage,
    pub reward: f64,
    pub time_advanced: bool,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct SchedulingEnv {
    config: EnvConfig,
    state: EnvState,
    total_jobs: usize,
    done: bool,
    seed: u64,
    checked: bool,
}

impl SchedulingEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let state = EnvState::empty(&config);
        Ok(SchedulingEnv {
            config,
            state,
            total_jobs: 0,
            done: true,
            seed: 0,
            checked: false,
        })
    }

    /// Re-verify state invariants after every transition and fail with
    /// [`Error::InvariantViolation`] on the first breach.
    pub fn set_checked(&mut self, checked: bool) {
        self.checked = checked;
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_jobs(&self) -> usize {
        self.total_jobs
    }

    pub fn render(&self) -> StateImage {
        render_image(&self.state, &self.config)
    }

    pub fn reset(&mut self, jobset: &Jobset) -> Result<StepOutcome> {
        self.reset_quiet(jobset)?;
        Ok(StepOutcome {
            image: self.render(),
            reward: 0.0,
            time_advanced: false,
            done: self.done,
            info: StepInfo {
                valid_action: true,
                finished_this_step: 0,
                dropped: self.state.dropped,
            },
        })
    }

    /// Like [`reset`](Self::reset) but skips rendering.
    pub fn reset_quiet(&mut self, jobset: &Jobset) -> Result<()> {
        if jobset.mode != self.config.mode {
            return Err(Error::config(format!(
                "jobset mode {:?} does not match environment mode {:?}",
                jobset.mode, self.config.mode
            )));
        }
        if jobset.r != self.config.r {
            return Err(Error::config("jobset r does not match environment r"));
        }
        if jobset.mode == Mode::Offline && jobset.len() > self.config.num_slots {
            return Err(Error::config(format!(
                "offline jobset has {} jobs but only {} slots",
                jobset.len(),
                self.config.num_slots
            )));
        }
        if let Some(job) = jobset.jobs.iter().find(|j| j.duration as usize > self.config.time_horizon) {
            return Err(Error::config(format!(
                "job {} lasts {} steps, longer than the horizon {}",
                job.id, job.duration, self.config.time_horizon
            )));
        }
        if jobset.jobs.iter().any(|j| j.arrival_time >= self.config.hard_step_cap) {
            return Err(Error::config("jobset arrivals extend past the hard step cap"));
        }
        self.state = EnvState::empty(&self.config);
        self.state.pending = jobset.jobs.iter().cloned().collect();
        self.total_jobs = jobset.len();
        self.seed = jobset.seed;
        self.surface_arrivals();
        self.done = self.is_complete();
        self.verify()?;
        Ok(())
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let t = self.transition(action)?;
        Ok(StepOutcome {
            image: self.render(),
            reward: t.reward,
            time_advanced: t.time_advanced,
            done: t.done,
            info: t.info,
        })
    }

    /// Executes `action` without rendering the next image.
    pub fn transition(&mut self, action: Action) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if action.0 > self.config.num_slots {
            return Err(Error::ActionOutOfRange {
                index: action.0,
                max: self.config.num_slots,
            });
        }
        let placement = self.state.slots.get(action.0).and_then(|slot| {
            slot.as_ref()
                .and_then(|job| self.state.occupancy.earliest_fit(job))
        });
        let outcome = match placement {
            Some(offset) => {
                self.allocate(action.0, offset);
                Transition {
                    reward: 0.0,
                    time_advanced: false,
                    done: false,
                    info: StepInfo {
                        valid_action: true,
                        finished_this_step: 0,
                        dropped: self.state.dropped,
                    },
                }
            }
            None => {
                let reward = self.state.reward(self.config.objective);
                let finished = self.move_on();
                Transition {
                    reward,
                    time_advanced: true,
                    done: self.done,
                    info: StepInfo {
                        valid_action: action.0 == self.config.num_slots,
                        finished_this_step: finished,
                        dropped: self.state.dropped,
                    },
                }
            }
        };
        self.verify()?;
        Ok(outcome)
    }

    fn verify(&self) -> Result<()> {
        if self.checked {
            self.state
                .check_invariants(self.total_jobs)
                .map_err(Error::InvariantViolation)?;
        }
        Ok(())
    }

    fn allocate(&mut self, slot: usize, offset: usize) {
        let job = self.state.slots[slot].take().expect("allocate on empty slot");
        self.state.occupancy.allocate(&job, offset);
        self.state.running.push(RunningJob {
            start_time: self.state.clock + offset as u32,
            job,
        });
        if let Some(next) = self.state.backlog.pop_front() {
            self.state.slots[slot] = Some(next);
        }
    }

    /// Advances the clock; returns the number of jobs that completed.
    fn move_on(&mut self) -> usize {
        let st = &mut self.state;
        st.clock += 1;
        st.occupancy.shift();
        let clock = st.clock;
        let before = st.finished.len();
        let mut i = 0;
        while i < st.running.len() {
            let run = &st.running[i];
            if run.start_time + run.job.duration <= clock {
                let run = st.running.swap_remove(i);
                st.finished.push(JobResult {
                    id: run.job.id,
                    arrival_time: run.job.arrival_time,
                    start_time: Some(run.start_time),
                    completion_time: run.start_time + run.job.duration - run.job.arrival_time,
                    ideal: run.job.duration,
                    censored: false,
                });
            } else {
                i += 1;
            }
        }
        // swap_remove scrambles order; keep running jobs in allocation order.
        st.running.sort_by_key(|r| (r.start_time, r.job.id));
        let finished = st.finished.len() - before;
        self.surface_arrivals();
        if self.is_complete() {
            self.done = true;
        } else if self.state.clock >= self.config.hard_step_cap {
            self.censor_remaining();
            self.done = true;
        }
        finished
    }

    fn surface_arrivals(&mut self) {
        let st = &mut self.state;
        for slot in st.slots.iter_mut() {
            if slot.is_none() {
                match st.backlog.pop_front() {
                    Some(job) => *slot = Some(job),
                    None => break,
                }
            }
        }
        while st.pending.front().is_some_and(|j| j.arrival_time <= st.clock) {
            let job = st.pending.pop_front().expect("front checked");
            if let Some(slot) = st.slots.iter_mut().find(|s| s.is_none()) {
                *slot = Some(job);
            } else if st.backlog.len() < self.config.backlog_capacity {
                st.backlog.push_back(job);
            } else {
                st.dropped += 1;
            }
        }
    }

    fn is_complete(&self) -> bool {
        self.state.finished.len() + self.state.dropped == self.total_jobs
    }

    fn censor_remaining(&mut self) {
        let st = &mut self.state;
        let cap = st.clock;
        let mut remaining: Vec<(Job, Option<u32>)> = Vec::new();
        remaining.extend(st.running.drain(..).map(|r| (r.job, Some(r.start_time))));
        remaining.extend(st.slots.iter_mut().filter_map(|s| s.take()).map(|j| (j, None)));
        remaining.extend(st.backlog.drain(..).map(|j| (j, None)));
        remaining.extend(st.pending.drain(..).map(|j| (j, None)));
        for (job, start) in remaining {
            st.finished.push(JobResult {
                id: job.id,
                arrival_time: job.arrival_time,
                start_time: start,
                completion_time: cap.saturating_sub(job.arrival_time),
                ideal: job.duration,
                censored: true,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(id: u32, arrival: u32, duration: u32, demand: [u32; 2]) -> Job {
        Job {
            id,
            arrival_time: arrival,
            duration,
            demand,
        }
    }

    fn online_set(jobs: Vec<Job>, r: u32) -> Jobset {
        Jobset {
            seed: 0,
            mode: Mode::Online,
            r,
            jobs,
            nominal_load: 0.0,
        }
    }

    fn small_config() -> EnvConfig {
        EnvConfig {
            r: 10,
            time_horizon: 10,
            num_slots: 5,
            backlog_capacity: 30,
            arrival_window: 25,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn empty_jobset_is_done_at_reset() {
        let mut env = SchedulingEnv::new(EnvConfig::default()).unwrap();
        let out = env.reset(&online_set(vec![], 20)).unwrap();
        assert!(out.done);
        assert!(matches!(env.step(Action(0)), Err(Error::EpisodeDone)));
    }

    #[test]
    fn overflow_goes_to_backlog() {
        let jobs = (0..12).map(|i| job(i, 0, 2, [11, 2])).collect();
        let mut env = SchedulingEnv::new(EnvConfig::default()).unwrap();
        env.reset(&online_set(jobs, 20)).unwrap();
        assert_eq!(env.state().slots.iter().flatten().count(), 10);
        assert_eq!(env.state().backlog.len(), 2);
    }

    #[test]
    fn drops_beyond_backlog_capacity() {
        let cfg = EnvConfig {
            num_slots: 2,
            backlog_capacity: 1,
            ..EnvConfig::default()
        };
        let jobs = (0..5).map(|i| job(i, 0, 2, [11, 2])).collect();
        let mut env = SchedulingEnv::new(cfg).unwrap();
        env.reset(&online_set(jobs, 20)).unwrap();
        assert_eq!(env.state().dropped, 2);
        assert_eq!(env.state().job_count(), 5);
    }

    #[test]
    fn offline_too_many_jobs_is_rejected() {
        let cfg = EnvConfig::offline(2, &EnvConfig::default());
        let set = Jobset {
            seed: 0,
            mode: Mode::Offline,
            r: 20,
            jobs: (0..3).map(|i| job(i, 0, 1, [10, 2])).collect(),
            nominal_load: 0.0,
        };
        let mut env = SchedulingEnv::new(cfg).unwrap();
        assert!(env.reset(&set).is_err());
    }

    #[test]
    fn action_out_of_range() {
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(vec![job(0, 0, 1, [1, 1])], 10)).unwrap();
        assert!(matches!(
            env.step(Action(6)),
            Err(Error::ActionOutOfRange { index: 6, max: 5 })
        ));
    }

    #[test]
    fn slowdown_reward_sums_inverse_durations() {
        // One running job (T=2), one waiting (T=4) that cannot fit right now.
        let jobs = vec![job(0, 0, 2, [10, 1]), job(1, 0, 4, [10, 1])];
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(jobs, 10)).unwrap();
        let first = env.step(Action(0)).unwrap();
        assert!(!first.time_advanced && first.reward == 0.0);
        let out = env.step(Action(5)).unwrap();
        assert!(out.time_advanced);
        assert!((out.reward + 0.75).abs() < 1e-12, "{}", out.reward);
    }

    #[test]
    fn completion_objective_counts_unfinished() {
        let cfg = EnvConfig {
            objective: Objective::CompletionTime,
            ..small_config()
        };
        let jobs = (0..3).map(|i| job(i, 0, 2, [6, 1])).collect();
        let mut env = SchedulingEnv::new(cfg).unwrap();
        env.reset(&online_set(jobs, 10)).unwrap();
        let out = env.step(Action(5)).unwrap();
        assert_eq!(out.reward, -3.0);
    }

    #[test]
    fn empty_slot_behaves_like_void() {
        let jobs = vec![job(0, 0, 3, [4, 1]), job(1, 2, 1, [2, 2])];
        let mut a = SchedulingEnv::new(small_config()).unwrap();
        a.reset(&online_set(jobs.clone(), 10)).unwrap();
        let mut b = a.clone();
        let via_empty = a.step(Action(3)).unwrap();
        let via_void = b.step(Action(5)).unwrap();
        assert_eq!(via_empty.reward, via_void.reward);
        assert_eq!(via_empty.image, via_void.image);
        assert!(via_empty.time_advanced);
        assert!(!via_empty.info.valid_action && via_void.info.valid_action);
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn hand_simulated_trace_from_clock_five() {
        // Job (demand [2,1], duration 3) arrives at 4, waits one step,
        // is scheduled at clock 5 into an empty cluster.
        let jobs = vec![job(0, 4, 3, [2, 1])];
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(jobs, 10)).unwrap();
        for _ in 0..5 {
            env.step(Action(5)).unwrap();
        }
        assert_eq!(env.state().clock, 5);
        env.step(Action(0)).unwrap();
        let run = &env.state().running[0];
        assert_eq!(run.start_time, 5);
        for row in 0..3 {
            assert_eq!(env.state().occupancy.used(0, row), 2);
            assert_eq!(env.state().occupancy.used(1, row), 1);
        }
        assert_eq!(env.state().occupancy.used(0, 3), 0);
        // clocks 5, 6, 7 run; the job completes at the end of clock 7.
        env.step(Action(5)).unwrap();
        env.step(Action(5)).unwrap();
        assert!(env.state().finished.is_empty());
        let last = env.step(Action(5)).unwrap();
        assert!(last.done);
        let res = &env.state().finished[0];
        assert_eq!(res.completion_time, 8 - 4);
        assert_eq!(res.start_time, Some(5));
    }

    #[test]
    fn single_job_scheduled_on_arrival() {
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(vec![job(0, 0, 1, [1, 1])], 10)).unwrap();
        let a = env.step(Action(0)).unwrap();
        assert_eq!(a.reward, 0.0);
        let b = env.step(Action(0)).unwrap();
        assert_eq!(b.reward, -1.0);
        assert!(b.done);
        assert_eq!(env.state().finished[0].slowdown(), 1.0);
    }

    #[test]
    fn selected_job_lands_at_earliest_offset() {
        let jobs = vec![job(0, 0, 2, [8, 1]), job(1, 0, 1, [5, 1])];
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(jobs, 10)).unwrap();
        env.step(Action(0)).unwrap();
        let out = env.step(Action(1)).unwrap();
        assert!(!out.time_advanced);
        assert_eq!(env.state().running[1].start_time, 2);
    }

    #[test]
    fn image_layout_widths() {
        assert_eq!(EnvConfig::default().layout().width(), 443);
        assert_eq!(small_config().layout().width(), 2 * 10 * 6 + 3);
        let off = EnvConfig::offline(15, &small_config());
        assert_eq!(off.layout().width(), 2 * 10 * 16);
    }

    #[test]
    fn image_of_running_job() {
        let mut env = SchedulingEnv::new(small_config()).unwrap();
        env.reset(&online_set(vec![job(0, 0, 2, [3, 1])], 10)).unwrap();
        assert_eq!(env.render().count_ones(), 2 * (3 + 1));
        env.step(Action(0)).unwrap();
        let img = env.render();
        for row in 0..2 {
            for col in 0..10 {
                assert_eq!(img.get(row, col), (col < 3) as u8);
            }
        }
        assert_eq!(img.count_ones(), 2 * 3 + 2);
    }

    #[test]
    fn empty_state_renders_blank() {
        let env = SchedulingEnv::new(EnvConfig::default()).unwrap();
        let img = env.render();
        assert_eq!((img.rows, img.cols), (20, 443));
        assert_eq!(img.count_ones(), 0);
    }

    #[test]
    fn backlog_fills_column_major() {
        let cfg = EnvConfig {
            num_slots: 1,
            ..small_config()
        };
        let jobs = (0..13).map(|i| job(i, 0, 1, [6, 1])).collect();
        let mut env = SchedulingEnv::new(cfg).unwrap();
        env.reset(&online_set(jobs, 10)).unwrap();
        assert_eq!(env.state().backlog.len(), 12);
        let img = env.render();
        let base = cfg_backlog_col(&env);
        for row in 0..10 {
            assert_eq!(img.get(row, base), 1);
        }
        assert_eq!(img.get(0, base + 1), 1);
        assert_eq!(img.get(1, base + 1), 1);
        assert_eq!(img.get(2, base + 1), 0);
    }

    fn cfg_backlog_col(env: &SchedulingEnv) -> usize {
        env.config().layout().backlog_col()
    }

    #[test]
    fn cap_censors_unfinished_jobs() {
        let cfg = EnvConfig {
            hard_step_cap: 3,
            ..small_config()
        };
        let mut env = SchedulingEnv::new(cfg).unwrap();
        env.reset(&online_set(vec![job(0, 0, 2, [1, 1])], 10)).unwrap();
        for _ in 0..3 {
            env.step(Action(5)).unwrap();
        }
        assert!(env.is_done());
        let res = &env.state().finished[0];
        assert!(res.censored);
        assert_eq!(res.completion_time, 3);
    }
}
