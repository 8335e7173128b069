use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::{mean, std_dev};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    /// Mean of `b − a`.
    pub mean_difference: f64,
    pub t: f64,
    /// One-sided p-value for the alternative `mean(a) < mean(b)`.
    pub p_value: f64,
}

impl PairedTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Paired one-sided t-test of `mean(a) < mean(b)` over matched samples.
pub fn paired_less(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired test needs two equal-length samples of at least two values".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let n = d.len();
    let m = mean(&d);
    let sd = std_dev(&d);
    if sd == 0.0 {
        let p_value = if m > 0.0 { 0.0 } else { 1.0 };
        let t = if m > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(PairedTest {
            n,
            mean_difference: m,
            t: if m == 0.0 { 0.0 } else { t },
            p_value,
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok(PairedTest {
        n,
        mean_difference: m,
        t,
        p_value: 1.0 - dist.cdf(t),
    })
}
