//! Run configuration: one JSON document embedding the workload, environment,
//! policy, training and evaluation settings, plus the two built-in presets.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::{EnvConfig, Objective};
use crate::error::{Error, Result};
use crate::nn::{Architecture, CnnWidths};
use crate::seeds::{derive_seed, SeedSpace};
use crate::training::{BcSettings, PgSettings};
use crate::workload::{Mode, WorkloadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size settings.
    Paper,
    /// Smaller cluster and budget that trains in minutes.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    #[serde(rename = "bc")]
    Bc,
    #[serde(rename = "pg")]
    Pg,
    #[serde(rename = "bc-then-pg")]
    BcThenPg,
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Pipeline::Bc),
            "pg" => Ok(Pipeline::Pg),
            "bc-then-pg" => Ok(Pipeline::BcThenPg),
            other => Err(Error::InvalidArgument(format!("unknown pipeline '{other}'"))),
        }
    }
}

impl Pipeline {
    pub fn runs_bc(self) -> bool {
        matches!(self, Pipeline::Bc | Pipeline::BcThenPg)
    }

    pub fn runs_pg(self) -> bool {
        matches!(self, Pipeline::Pg | Pipeline::BcThenPg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub pipeline: Pipeline,
    /// Discount factor.
    pub gamma: f64,
    /// Policy-gradient learning rate.
    pub lr: f64,
    pub jobsets_per_epoch: usize,
    /// Draw fresh training jobsets every epoch instead of fixing one corpus
    /// for the whole run.
    pub resample_jobsets: bool,
    pub rollouts_per_jobset: usize,
    pub epochs: usize,
    /// Jobsets the teacher is demonstrated on.
    pub bc_jobsets: usize,
    pub bc_max_epochs: usize,
    pub bc_batch_size: usize,
    pub bc_lr: f64,
    pub bc_patience: usize,
    pub bc_validation_fraction: f64,
    /// Write a policy checkpoint every this many PG epochs.
    pub checkpoint_every: usize,
    /// Per-jobset memory for cached forward passes during PG, in MiB.
    pub trace_cache_mib: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pipeline: Pipeline::BcThenPg,
            gamma: 0.99,
            lr: 1e-3,
            jobsets_per_epoch: 100,
            resample_jobsets: false,
            rollouts_per_jobset: 20,
            epochs: 500,
            bc_jobsets: 100,
            bc_max_epochs: 50,
            bc_batch_size: 32,
            bc_lr: 1e-3,
            bc_patience: 5,
            bc_validation_fraction: 0.1,
            checkpoint_every: 10,
            trace_cache_mib: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if self.rollouts_per_jobset < 2 {
            return Err(Error::config("rollouts_per_jobset must be at least 2"));
        }
        let counts = [
            ("jobsets_per_epoch", self.jobsets_per_epoch),
            ("epochs", self.epochs),
            ("bc_jobsets", self.bc_jobsets),
            ("bc_max_epochs", self.bc_max_epochs),
            ("bc_batch_size", self.bc_batch_size),
            ("bc_patience", self.bc_patience),
            ("checkpoint_every", self.checkpoint_every),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if !(self.lr > 0.0 && self.bc_lr > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.bc_validation_fraction) {
            return Err(Error::config("bc_validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Cnn,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub cnn: CnnWidths,
    /// Hidden width of the fully connected alternative.
    pub mlp_hidden: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Cnn,
            cnn: CnnWidths::default(),
            mlp_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub loads: Vec<f64>,
    /// Agent names: `sjf`, `packer`, `random`, or `policy:<checkpoint path>`.
    pub agents: Vec<String>,
    pub seeds_per_cell: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            loads: (1..=19).map(|i| i as f64 / 10.0).collect(),
            agents: vec!["sjf".into(), "packer".into(), "random".into()],
            seeds_per_cell: 100,
        }
    }
}

impl EvalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.loads.is_empty() || self.loads.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::config("eval loads must be positive"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("eval needs at least one agent"));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::config("seeds_per_cell must be positive"));
        }
        if self.seeds_per_cell < 10 {
            log::warn!("fewer than 10 seeds per cell; standard deviations will be unreliable");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Preset the document was built from. Informational once resolved.
    pub preset: Option<Preset>,
    pub seed: u64,
    /// Target cluster load for online jobsets; overrides
    /// `workload.arrival_rate` when set.
    pub load: Option<f64>,
    pub workload: WorkloadConfig,
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub eval: EvalSpec,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Paper)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => RunConfig {
                preset: Some(Preset::Paper),
                seed: 0,
                load: Some(0.9),
                workload: WorkloadConfig::default(),
                env: EnvConfig::default(),
                policy: PolicyConfig::default(),
                train: TrainConfig::default(),
                eval: EvalSpec::default(),
                out_dir: "runs/paper".into(),
            },
            Preset::Desk => {
                let workload = WorkloadConfig {
                    r: 10,
                    // Long jobs must fit the 10-step horizon.
                    long_duration: [5, 7],
                    arrival_window: 25,
                    num_jobs: 15,
                    ..WorkloadConfig::default()
                };
                let env = EnvConfig {
                    r: 10,
                    time_horizon: 10,
                    num_slots: 5,
                    backlog_capacity: 30,
                    arrival_window: 25,
                    ..EnvConfig::default()
                };
                RunConfig {
                    preset: Some(Preset::Desk),
                    seed: 0,
                    load: Some(0.9),
                    workload,
                    env,
                    policy: PolicyConfig::default(),
                    train: TrainConfig {
                        jobsets_per_epoch: 20,
                        // A fixed corpus this small is memorized and the
                        // policy stops improving on unseen jobsets.
                        resample_jobsets: true,
                        rollouts_per_jobset: 10,
                        epochs: 150,
                        bc_jobsets: 100,
                        checkpoint_every: 10,
                        ..TrainConfig::default()
                    },
                    eval: EvalSpec::default(),
                    out_dir: "runs/desk".into(),
                }
            }
        }
    }

    /// Parses a config document. A top-level `"preset"` key selects the base
    /// whose values the document's keys override; otherwise the paper preset
    /// is the base. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let preset = match doc.get("preset") {
            None | Some(Value::Null) => Preset::Paper,
            Some(v) => serde_json::from_value(v.clone())?,
        };
        let mut base = serde_json::to_value(RunConfig::preset(preset))?;
        merge(&mut base, doc);
        let config: RunConfig = serde_json::from_value(base)?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies `load` to the workload and derives the offline environment
    /// (one slot per job, no backlog), then validates everything. Resolving
    /// twice gives the same document.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        if let Some(load) = out.load {
            if !(load.is_finite() && load > 0.0) {
                return Err(Error::config("load must be positive"));
            }
            out.workload = out.workload.with_load(load);
        }
        if out.env.mode == Mode::Offline {
            out.env = EnvConfig::offline(out.workload.num_jobs, &out.env);
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        self.env.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.workload.r != self.env.r {
            return Err(Error::config("workload.r and env.r differ"));
        }
        if self.env.mode == Mode::Online && self.workload.arrival_window != self.env.arrival_window {
            return Err(Error::config("workload.arrival_window and env.arrival_window differ"));
        }
        if self.workload.max_duration() as usize > self.env.time_horizon {
            return Err(Error::config(format!(
                "jobs can last {} steps but the horizon is only {}",
                self.workload.max_duration(),
                self.env.time_horizon
            )));
        }
        if self.env.mode == Mode::Offline && self.workload.num_jobs > self.env.num_slots {
            return Err(Error::config("offline runs need one slot per job"));
        }
        self.architecture().validate()
    }

    pub fn mode(&self) -> Mode {
        self.env.mode
    }

    pub fn objective(&self) -> Objective {
        self.env.objective
    }

    pub fn architecture(&self) -> Architecture {
        let layout = self.env.layout();
        let actions = self.env.num_actions();
        match self.policy.kind {
            PolicyKind::Cnn => Architecture::cnn(layout.rows, layout.width(), actions, self.policy.cnn),
            PolicyKind::Mlp => Architecture::mlp(layout.rows, layout.width(), actions, self.policy.mlp_hidden),
        }
    }

    /// Seeds of the fixed training jobsets.
    /// Seeds of the jobsets PG trains on in `epoch`.
    pub fn epoch_jobset_seeds(&self, epoch: usize) -> Vec<u64> {
        (0..self.train.jobsets_per_epoch as u64)
            .map(|i| {
                if self.train.resample_jobsets {
                    derive_seed(self.seed, SeedSpace::TrainJobsets, &[epoch as u64, i])
                } else {
                    derive_seed(self.seed, SeedSpace::TrainJobsets, &[i])
                }
            })
            .collect()
    }

    /// Every jobset seed PG trains on over the whole run.
    pub fn train_jobset_seeds(&self) -> Vec<u64> {
        if !self.train.resample_jobsets {
            return self.epoch_jobset_seeds(0);
        }
        (0..self.train.epochs).flat_map(|e| self.epoch_jobset_seeds(e)).collect()
    }

    /// Seeds of the jobsets the teacher is demonstrated on.
    pub fn demo_jobset_seeds(&self) -> Vec<u64> {
        (0..self.train.bc_jobsets as u64)
            .map(|i| derive_seed(self.seed, SeedSpace::DemoJobsets, &[i]))
            .collect()
    }

    pub fn pg_settings(&self) -> PgSettings {
        PgSettings {
            gamma: self.train.gamma,
            rollouts: self.train.rollouts_per_jobset,
            seed: self.seed,
            trace_budget_bytes: self.train.trace_cache_mib << 20,
        }
    }

    pub fn bc_settings(&self) -> BcSettings {
        BcSettings {
            lr: self.train.bc_lr,
            batch_size: self.train.bc_batch_size,
            max_epochs: self.train.bc_max_epochs,
            patience: self.train.bc_patience,
            seed: self.seed,
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key, any
/// other value replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
