use std::fs;
use std::path::Path;

use schedlab::config::{Pipeline, Preset, RunConfig};
use schedlab::env::SchedulingEnv;
use schedlab::nn::{content_hash, load_policy, CnnWidths};
use schedlab::pipeline::{checkpoint_dir, pg_checkpoint_path, read_metrics, train, training_seeds_of, MetricsRow, TrainOptions};
use schedlab::workload::Mode;

fn tiny(pipeline: Pipeline, seed: u64) -> RunConfig {
    let mut c = RunConfig::preset(Preset::Desk);
    c.seed = seed;
    c.policy.cnn = CnnWidths {
        conv1: 2,
        conv2: 3,
        kernel: 3,
        hidden: 6,
    };
    c.train.pipeline = pipeline;
    c.train.jobsets_per_epoch = 2;
    c.train.rollouts_per_jobset = 2;
    c.train.epochs = 4;
    c.train.bc_jobsets = 4;
    c.train.bc_max_epochs = 2;
    c.train.checkpoint_every = 2;
    c
}

fn without_clock(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    rows.iter()
        .cloned()
        .map(|mut r| {
            r.wallclock_s = 0.0;
            r
        })
        .collect()
}

fn policy_bytes(dir: &Path, name: &str) -> Vec<f64> {
    load_policy(&checkpoint_dir(dir).join(name)).unwrap().params
}

#[test]
fn same_seed_gives_identical_logs_and_policy() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = tiny(Pipeline::BcThenPg, 3);
    let sa = train(&config, a.path(), TrainOptions::default()).unwrap();
    let sb = train(&config, b.path(), TrainOptions::default()).unwrap();
    assert_eq!(without_clock(&sa.metrics), without_clock(&sb.metrics));
    assert_eq!(sa.policy_hash, sb.policy_hash);
    assert_eq!(
        fs::read_to_string(a.path().join("bc_history.csv")).unwrap(),
        fs::read_to_string(b.path().join("bc_history.csv")).unwrap()
    );
    assert_eq!(sa.metrics.len(), 4);
    assert!(sa.complete);

    let other = tempfile::tempdir().unwrap();
    let sc = train(&tiny(Pipeline::BcThenPg, 4), other.path(), TrainOptions::default()).unwrap();
    assert_ne!(sa.policy_hash, sc.policy_hash);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let config = tiny(Pipeline::Pg, 11);
    let whole = tempfile::tempdir().unwrap();
    let full = train(&config, whole.path(), TrainOptions::default()).unwrap();

    let split = tempfile::tempdir().unwrap();
    let first = train(
        &config,
        split.path(),
        TrainOptions {
            resume: false,
            epoch_limit: Some(1),
        },
    )
    .unwrap();
    assert!(!first.complete);
    assert_eq!(first.metrics.len(), 1);
    let second = train(
        &config,
        split.path(),
        TrainOptions {
            resume: true,
            epoch_limit: None,
        },
    )
    .unwrap();
    assert!(second.complete);
    assert_eq!(without_clock(&second.metrics), without_clock(&full.metrics));
    assert_eq!(second.policy_hash, full.policy_hash);
    assert_eq!(read_metrics(&split.path().join("metrics.csv")).unwrap().len(), 4);
}

#[test]
fn resume_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(Pipeline::Pg, 1);
    train(
        &config,
        dir.path(),
        TrainOptions {
            resume: false,
            epoch_limit: Some(1),
        },
    )
    .unwrap();
    let mut changed = config.clone();
    changed.train.lr = 5e-4;
    let r = train(
        &changed,
        dir.path(),
        TrainOptions {
            resume: true,
            epoch_limit: None,
        },
    );
    assert!(r.is_err());
}

#[test]
fn pg_starts_from_the_cloned_policy() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&tiny(Pipeline::BcThenPg, 5), dir.path(), TrainOptions::default()).unwrap();
    let bc = load_policy(&checkpoint_dir(dir.path()).join("bc_final.json")).unwrap();
    let pg0 = load_policy(&pg_checkpoint_path(dir.path(), 0)).unwrap();
    assert_eq!(content_hash(&bc), content_hash(&pg0));
    for e in [2, 4] {
        assert!(pg_checkpoint_path(dir.path(), e).exists(), "epoch {e}");
    }
    assert_eq!(policy_bytes(dir.path(), "final.json"), summary.policy.params);
    let bc_report = summary.bc.unwrap();
    assert!(bc_report.train_examples > 0 && bc_report.validation_examples > 0);
}

#[test]
fn bc_only_run_writes_no_pg_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&tiny(Pipeline::Bc, 2), dir.path(), TrainOptions::default()).unwrap();
    assert!(summary.metrics.is_empty());
    assert!(!pg_checkpoint_path(dir.path(), 0).exists());
    assert_eq!(
        policy_bytes(dir.path(), "final.json"),
        policy_bytes(dir.path(), "bc_final.json")
    );
}

#[test]
fn checkpoints_carry_their_training_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(Pipeline::BcThenPg, 8);
    train(&config, dir.path(), TrainOptions::default()).unwrap();
    let ck = schedlab::nn::Checkpoint::load(&checkpoint_dir(dir.path()).join("final.json")).unwrap();
    let seeds = training_seeds_of(&ck).unwrap();
    let resolved = config.resolved().unwrap();
    // Resampling draws new jobsets each epoch: 4 epochs x 2 jobsets, plus 4 demo jobsets.
    assert_eq!(seeds.len(), 4 * 2 + 4);
    for s in resolved.epoch_jobset_seeds(3) {
        assert!(seeds.contains(&s));
    }
}

#[test]
fn offline_mode_sizes_the_environment_to_the_jobset() {
    let mut c = tiny(Pipeline::Pg, 0);
    c.env.mode = Mode::Offline;
    c.env.objective = schedlab::env::Objective::CompletionTime;
    let resolved = c.resolved().unwrap();
    assert_eq!(resolved.env.num_slots, 15);
    assert_eq!(resolved.env.backlog_capacity, 0);
    SchedulingEnv::new(resolved.env.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = train(&c, dir.path(), TrainOptions::default()).unwrap();
    assert_eq!(s.metrics.len(), 4);
    assert_eq!(s.policy.num_actions(), 16);
}
