use serde::{Deserialize, Serialize};

use super::net::{Head, PolicyNet};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_param: Option<usize>,
    /// Largest relative error among each layer's parameters.
    pub per_layer: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Magnitude below which errors are measured absolutely rather than relative
/// to the gradient.
const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares every analytic partial derivative of `head`'s loss against a
/// central difference with step `h`.
pub fn grad_check(net: &PolicyNet, input: &[f64], head: Head, h: f64, tolerance: f64) -> Result<GradCheckReport> {
    let (_, analytic) = net.loss_and_grad(input, head)?;
    let mut probe = PolicyNet {
        fault: None,
        ..net.clone()
    };
    let offsets = net.arch.param_offsets();
    let counts = net.arch.layer_param_counts();
    let mut per_layer = vec![0.0f64; counts.len()];
    let mut max_rel = 0.0f64;
    let mut worst = None;
    for (layer, (&start, &count)) in offsets.iter().zip(&counts).enumerate() {
        for i in start..start + count {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let plus = probe.loss(input, head)?;
            probe.params[i] = orig - h;
            let minus = probe.loss(input, head)?;
            probe.params[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = relative_error(analytic[i], numeric);
            per_layer[layer] = per_layer[layer].max(rel);
            if rel > max_rel || rel.is_nan() {
                max_rel = rel;
                worst = Some(i);
            }
        }
    }
    Ok(GradCheckReport {
        checked: net.num_params(),
        max_rel_error: max_rel,
        worst_param: worst,
        per_layer,
        tolerance,
        passed: max_rel < tolerance,
    })
}
