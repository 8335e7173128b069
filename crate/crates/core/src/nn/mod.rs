//! A small dependency-free neural network stack: same-padded convolutions,
//! 2×2 average pooling, dense layers, softmax policy heads, RMSProp/SGD and a
//! finite-difference gradient checker. Everything is `f64`.

mod arch;
mod checkpoint;
mod gradcheck;
mod net;
mod optim;

pub use arch::{Activation, Architecture, CnnWidths, LayerSpec, Shape};
pub use checkpoint::{content_hash, load_policy, save_policy, Checkpoint, CHECKPOINT_FORMAT};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use net::{argmax, entropy, log_prob_logit_grad, softmax, Head, PolicyNet, Tensor, Trace};
pub use optim::{Direction, OptimizerKind, OptimizerState};
