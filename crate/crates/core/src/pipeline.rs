//! End-to-end training runs: behavior cloning, policy gradient, or both, with
//! a run directory holding the resolved config, checkpoints, metrics and a
//! resumable state file.
//!
//! ```text
//! <out>/config.json            resolved run config
//! <out>/metrics.csv            one row per PG epoch
//! <out>/bc_history.csv         one row per BC epoch (row 0 = initial policy)
//! <out>/checkpoints/bc_final.json
//! <out>/checkpoints/pg_epoch_NNNN.json   parameters after NNNN updates
//! <out>/checkpoints/final.json
//! <out>/state.json             optimizer state and next epoch, for resume
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::SjfAgent;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{content_hash, save_policy, Checkpoint, OptimizerState, PolicyNet};
use crate::seeds::{rng_for, SeedSpace};
use crate::training::{collect_demonstrations, pg_epoch, train_bc, BcEpoch, EpochStats, SchedulingRollout};
use crate::workload::{generate_jobset, Jobset};

pub const METRICS_FILE: &str = "metrics.csv";
pub const BC_HISTORY_FILE: &str = "bc_history.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const STATE_FILE: &str = "state.json";

/// One row of the PG metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub mean_discounted_reward: f64,
    pub max_discounted_reward: f64,
    pub mean_slowdown: f64,
    pub entropy: f64,
    pub wallclock_s: f64,
}

impl MetricsRow {
    fn from_stats(stats: &EpochStats, wallclock_s: f64) -> Self {
        MetricsRow {
            epoch: stats.epoch,
            mean_discounted_reward: stats.mean_discounted_reward,
            max_discounted_reward: stats.max_discounted_reward,
            mean_slowdown: stats.mean_slowdown,
            entropy: stats.entropy,
            wallclock_s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResumeState {
    next_epoch: usize,
    elapsed_s: f64,
    optimizer: OptimizerState,
    policy: Checkpoint,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Continue from `state.json` if present.
    pub resume: bool,
    /// Stop after this many PG epochs in this invocation, saving state.
    pub epoch_limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BcReport {
    pub history: Vec<BcEpoch>,
    pub best_epoch: usize,
    pub train_examples: usize,
    pub validation_examples: usize,
    pub validation_seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub bc: Option<BcReport>,
    /// Every metrics row in the run directory, earlier sessions included.
    pub metrics: Vec<MetricsRow>,
    pub policy: PolicyNet,
    pub policy_hash: String,
    /// False when `epoch_limit` stopped the run early.
    pub complete: bool,
}

pub fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

pub fn pg_checkpoint_path(out: &Path, updates: usize) -> PathBuf {
    checkpoint_dir(out).join(format!("pg_epoch_{updates:04}.json"))
}

pub fn jobsets_for(config: &RunConfig, seeds: &[u64]) -> Result<Vec<Jobset>> {
    seeds
        .iter()
        .map(|&s| generate_jobset(&config.workload, config.mode(), s))
        .collect()
}

fn checkpoint_meta(config: &RunConfig, stage: &str, updates: usize) -> Result<serde_json::Value> {
    Ok(json!({ "stage": stage, "updates": updates, "run": serde_json::to_value(config)? }))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "epoch",
            "mean_discounted_reward",
            "max_discounted_reward",
            "mean_slowdown",
            "entropy",
            "wallclock_s",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let file = fs::OpenOptions::new().append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

fn write_bc_history(path: &Path, history: &[BcEpoch]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs the configured pipeline, writing everything under `out`.
pub fn train(config: &RunConfig, out: &Path, options: TrainOptions) -> Result<TrainSummary> {
    let config = config.resolved()?;
    fs::create_dir_all(checkpoint_dir(out))?;
    let config_text = config.to_json()?;
    let config_path = out.join(CONFIG_FILE);
    let state_path = out.join(STATE_FILE);
    let metrics_path = out.join(METRICS_FILE);

    let resume_state: Option<ResumeState> = if options.resume && state_path.exists() {
        let saved = fs::read_to_string(&config_path)?;
        if RunConfig::from_json(&saved)? != config {
            return Err(Error::config(format!(
                "{} was written by a different config; refusing to resume",
                config_path.display()
            )));
        }
        Some(serde_json::from_str(&fs::read_to_string(&state_path)?)?)
    } else {
        None
    };
    write_atomic(&config_path, &config_text)?;

    let arch = config.architecture();
    let mut bc_report = None;
    let started = Instant::now();

    let (mut net, mut optimizer, start_epoch, elapsed_before) = match resume_state {
        Some(state) => {
            log::info!("resuming at PG epoch {}", state.next_epoch);
            let mut rows = read_metrics(&metrics_path).unwrap_or_default();
            rows.retain(|r| r.epoch < state.next_epoch);
            write_metrics(&metrics_path, &rows)?;
            (state.policy.into_net()?, state.optimizer, state.next_epoch, state.elapsed_s)
        }
        None => {
            let mut init_rng = rng_for(config.seed, SeedSpace::Init, &[]);
            let mut net = PolicyNet::init(arch.clone(), &mut init_rng)?;
            if config.train.pipeline.runs_bc() {
                let jobsets = jobsets_for(&config, &config.demo_jobset_seeds())?;
                let dataset = collect_demonstrations(
                    &jobsets,
                    &mut SjfAgent,
                    &config.env,
                    config.train.bc_validation_fraction,
                )?;
                log::info!(
                    "collected {} demonstrations ({} validation)",
                    dataset.len(),
                    dataset.validation.len()
                );
                let outcome = train_bc(&dataset, net, &config.bc_settings())?;
                write_bc_history(&out.join(BC_HISTORY_FILE), &outcome.history)?;
                save_policy(
                    &outcome.net,
                    checkpoint_meta(&config, "bc", 0)?,
                    &checkpoint_dir(out).join("bc_final.json"),
                )?;
                bc_report = Some(BcReport {
                    history: outcome.history,
                    best_epoch: outcome.best_epoch,
                    train_examples: dataset.train.len(),
                    validation_examples: dataset.validation.len(),
                    validation_seeds: dataset.validation_seeds,
                });
                net = outcome.net;
            }
            write_metrics(&metrics_path, &[])?;
            let optimizer = OptimizerState::rmsprop(net.num_params(), config.train.lr);
            (net, optimizer, 0, 0.0)
        }
    };

    let mut complete = true;
    if config.train.pipeline.runs_pg() {
        let mut jobsets = jobsets_for(&config, &config.epoch_jobset_seeds(start_epoch))?;
        let settings = config.pg_settings();
        let env = config.env.clone();
        if start_epoch == 0 {
            save_policy(&net, checkpoint_meta(&config, "pg", 0)?, &pg_checkpoint_path(out, 0))?;
        }
        let save_state = |net: &PolicyNet, optimizer: &OptimizerState, next_epoch: usize| -> Result<()> {
            let state = ResumeState {
                next_epoch,
                elapsed_s: elapsed_before + started.elapsed().as_secs_f64(),
                optimizer: optimizer.clone(),
                policy: Checkpoint::from_net(net, checkpoint_meta(&config, "pg", next_epoch)?),
            };
            write_atomic(&state_path, &serde_json::to_string(&state)?)
        };
        let mut run_here = 0;
        for epoch in start_epoch..config.train.epochs {
            if options.epoch_limit.is_some_and(|limit| run_here >= limit) {
                complete = false;
                break;
            }
            if config.train.resample_jobsets && epoch != start_epoch {
                jobsets = jobsets_for(&config, &config.epoch_jobset_seeds(epoch))?;
            }
            let stats = pg_epoch(
                &mut net,
                &mut optimizer,
                jobsets.len(),
                |i| SchedulingRollout::new(&env, &jobsets[i]),
                &settings,
                epoch,
            )?;
            run_here += 1;
            let wallclock = elapsed_before + started.elapsed().as_secs_f64();
            append_metrics(&metrics_path, &MetricsRow::from_stats(&stats, wallclock))?;
            log::info!(
                "epoch {epoch}: reward {:.3} (max {:.3}) slowdown {:.3} entropy {:.3}",
                stats.mean_discounted_reward,
                stats.max_discounted_reward,
                stats.mean_slowdown,
                stats.entropy
            );
            let updates = epoch + 1;
            if updates % config.train.checkpoint_every == 0 || updates == config.train.epochs {
                save_policy(&net, checkpoint_meta(&config, "pg", updates)?, &pg_checkpoint_path(out, updates))?;
                save_state(&net, &optimizer, updates)?;
            }
        }
        if !complete {
            let next = start_epoch + run_here;
            save_state(&net, &optimizer, next)?;
        }
    }

    let stage = if config.train.pipeline.runs_pg() { "pg" } else { "bc" };
    let policy_hash = save_policy(
        &net,
        checkpoint_meta(&config, stage, optimizer.updates as usize)?,
        &checkpoint_dir(out).join("final.json"),
    )?;
    debug_assert_eq!(policy_hash, content_hash(&net));
    let metrics = if metrics_path.exists() { read_metrics(&metrics_path)? } else { Vec::new() };
    Ok(TrainSummary {
        config,
        out_dir: out.to_path_buf(),
        bc: bc_report,
        metrics,
        policy: net,
        policy_hash,
        complete,
    })
}

/// Jobset seeds that the run which wrote `checkpoint` trained or
/// demonstrated on, when the checkpoint carries its run config.
pub fn training_seeds_of(checkpoint: &Checkpoint) -> Option<Vec<u64>> {
    let run: RunConfig = serde_json::from_value(checkpoint.config.get("run")?.clone()).ok()?;
    let mut seeds = run.train_jobset_seeds();
    seeds.extend(run.demo_jobset_seeds());
    Some(seeds)
}
