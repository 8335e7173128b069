use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Step scaled by a running RMS of past gradients.
    RmsProp,
    /// `θ ± α g`.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    pub second_moment: Vec<f64>,
    pub updates: u64,
}

impl OptimizerState {
    pub fn rmsprop(num_params: usize, lr: f64) -> Self {
        OptimizerState {
            kind: OptimizerKind::RmsProp,
            lr,
            decay: 0.9,
            eps: 1e-8,
            second_moment: vec![0.0; num_params],
            updates: 0,
        }
    }

    pub fn sgd(num_params: usize, lr: f64) -> Self {
        OptimizerState {
            kind: OptimizerKind::Sgd,
            second_moment: vec![0.0; num_params],
            ..Self::rmsprop(num_params, lr)
        }
    }

    /// Applies one step. Non-finite gradients leave both the parameters and
    /// the accumulators untouched and return [`Error::NonFinite`].
    pub fn apply_update(&mut self, params: &mut [f64], grads: &[f64], direction: Direction) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.second_moment.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.second_moment.len()),
                got: format!("{} params, {} grads", params.len(), grads.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            log::warn!("skipping update: gradient {i} is {}", grads[i]);
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        let sign = match direction {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p += sign * self.lr * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, &g), m) in params.iter_mut().zip(grads).zip(self.second_moment.iter_mut()) {
                    *m = self.decay * *m + (1.0 - self.decay) * g * g;
                    *p += sign * self.lr * g / (m.sqrt() + self.eps);
                }
            }
        }
        self.updates += 1;
        Ok(())
    }
}
