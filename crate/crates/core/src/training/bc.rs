use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{run_episode, Agent, EnvConfig, StateImage};
use crate::error::{Error, Result};
use crate::nn::{argmax, Direction, Head, OptimizerState, PolicyNet};
use crate::seeds::{rng_for, SeedSpace};
use crate::workload::Jobset;

/// One teacher decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub image: StateImage,
    pub action: usize,
    pub jobset_seed: u64,
}

/// Demonstrations split into training and validation parts by jobset, so no
/// jobset contributes to both.
#[derive(Debug, Clone, Default)]
pub struct BcDataset {
    pub train: Vec<Demo>,
    pub validation: Vec<Demo>,
    pub train_seeds: Vec<u64>,
    pub validation_seeds: Vec<u64>,
}

impl BcDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of jobsets held out for validation out of `n`.
fn validation_count(n: usize, fraction: f64) -> usize {
    if n < 2 || fraction <= 0.0 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Runs `teacher` on every jobset and records each (image, action) pair,
/// void actions included. The last `validation_fraction` of the jobsets form
/// the validation split.
pub fn collect_demonstrations(
    jobsets: &[Jobset],
    teacher: &mut dyn Agent,
    config: &EnvConfig,
    validation_fraction: f64,
) -> Result<BcDataset> {
    if jobsets.is_empty() {
        return Err(Error::InvalidArgument("no jobsets to demonstrate on".into()));
    }
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::config("validation fraction must lie in [0, 1)"));
    }
    let split = jobsets.len() - validation_count(jobsets.len(), validation_fraction);
    let mut data = BcDataset::default();
    for (i, jobset) in jobsets.iter().enumerate() {
        let rec = run_episode(jobset, config, teacher, true)?;
        let images = rec.images.unwrap_or_default();
        let demos = images.into_iter().zip(rec.actions).map(|(image, action)| Demo {
            image,
            action,
            jobset_seed: jobset.seed,
        });
        if i < split {
            data.train.extend(demos);
            data.train_seeds.push(jobset.seed);
        } else {
            data.validation.extend(demos);
            data.validation_seeds.push(jobset.seed);
        }
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    /// Seed for the per-epoch shuffles.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcEpoch {
    pub epoch: usize,
    /// Running mean over the epoch's mini-batches; row 0 is a full pass.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct BcOutcome {
    /// Parameters with the best validation accuracy seen, initialization
    /// included.
    pub net: PolicyNet,
    /// Row 0 evaluates the initial parameters.
    pub history: Vec<BcEpoch>,
    pub best_epoch: usize,
}

const CHUNK: usize = 8;

/// Mean cross-entropy and action-match accuracy over `demos`.
pub fn evaluate_demos(net: &PolicyNet, demos: &[Demo]) -> Result<(f64, f64)> {
    if demos.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let parts: Vec<Result<(f64, usize)>> = demos
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut hits = 0;
            for d in chunk {
                let probs = net.forward(&d.image.to_f64())?;
                loss += Head::CrossEntropy { target: d.action }.loss(&probs);
                hits += usize::from(argmax(&probs) == d.action);
            }
            Ok((loss, hits))
        })
        .collect();
    let mut loss = 0.0;
    let mut hits = 0;
    for p in parts {
        let (l, h) = p?;
        loss += l;
        hits += h;
    }
    let n = demos.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Summed cross-entropy gradient, loss and hits over a batch, accumulated in
/// fixed-size chunks so the sum order is independent of the thread count.
fn batch_gradient(net: &PolicyNet, batch: &[&Demo]) -> Result<(Vec<f64>, f64, usize)> {
    let parts: Vec<Result<(Vec<f64>, f64, usize)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0; net.num_params()];
            let mut loss = 0.0;
            let mut hits = 0;
            for d in chunk {
                let trace = net.forward_trace(&d.image.to_f64())?;
                let head = Head::CrossEntropy { target: d.action };
                loss += head.loss(trace.probs());
                hits += usize::from(argmax(trace.probs()) == d.action);
                net.backward_into(&trace, &head.logit_grad(trace.probs()), &mut grads)?;
            }
            Ok((grads, loss, hits))
        })
        .collect();
    let mut grads = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    let mut hits = 0;
    for p in parts {
        let (g, l, h) = p?;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
        loss += l;
        hits += h;
    }
    Ok((grads, loss, hits))
}

/// Mini-batch cross-entropy training with RMSProp, stopping once validation
/// accuracy has not improved for `patience` epochs. Falls back to training
/// accuracy when the validation split is empty.
pub fn train_bc(dataset: &BcDataset, net: PolicyNet, settings: &BcSettings) -> Result<BcOutcome> {
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("behavior cloning needs training examples".into()));
    }
    if settings.batch_size == 0 || settings.lr <= 0.0 {
        return Err(Error::config("batch size and learning rate must be positive"));
    }
    let mut net = net;
    let mut optimizer = OptimizerState::rmsprop(net.num_params(), settings.lr);
    let score = |row: &BcEpoch| {
        if dataset.validation.is_empty() {
            row.train_accuracy
        } else {
            row.validation_accuracy
        }
    };

    let (train_loss, train_accuracy) = evaluate_demos(&net, &dataset.train)?;
    let (validation_loss, validation_accuracy) = evaluate_demos(&net, &dataset.validation)?;
    let mut history = vec![BcEpoch {
        epoch: 0,
        train_loss,
        train_accuracy,
        validation_loss,
        validation_accuracy,
    }];
    let mut best = (score(&history[0]), 0, net.params.clone());

    for epoch in 1..=settings.max_epochs {
        let mut rng = rng_for(settings.seed, SeedSpace::Shuffle, &[epoch as u64]);
        let mut order: Vec<&Demo> = dataset.train.iter().collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0;
        for batch in order.chunks(settings.batch_size) {
            let (mut grads, loss, h) = batch_gradient(&net, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "behavior-cloning loss {loss} in epoch {epoch}"
                )));
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            optimizer.apply_update(&mut net.params, &grads, Direction::Descent)?;
            loss_sum += loss;
            hits += h;
        }
        let n = dataset.train.len() as f64;
        let (validation_loss, validation_accuracy) = evaluate_demos(&net, &dataset.validation)?;
        let row = BcEpoch {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: hits as f64 / n,
            validation_loss,
            validation_accuracy,
        };
        log::info!(
            "bc epoch {epoch}: loss {:.4} acc {:.3} val acc {:.3}",
            row.train_loss,
            row.train_accuracy,
            row.validation_accuracy
        );
        history.push(row);
        if score(&row) > best.0 {
            best = (score(&row), epoch, net.params.clone());
        } else if epoch - best.1 >= settings.patience {
            break;
        }
    }
    net.params = best.2;
    Ok(BcOutcome {
        net,
        history,
        best_epoch: best.1,
    })
}
