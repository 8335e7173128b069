//! Behavior cloning from a heuristic teacher and REINFORCE policy-gradient
//! training with a per-timestep baseline.

mod bc;
mod pg;
mod returns;
mod rollout;

pub use bc::{collect_demonstrations, evaluate_demos, train_bc, BcDataset, BcEpoch, BcOutcome, BcSettings, Demo};
pub use pg::{pg_epoch, pg_gradient, EpochStats, PgSettings};
pub use returns::{compute_returns, time_baseline};
pub use rollout::{sample_action, BanditEnv, PolicyAgent, RolloutEnv, SchedulingRollout};
