/// Discounted returns `v_t = r_t + γ v_{t+1}` with `v` zero past the end.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Per-timestep mean return over a group of rollouts. Rollouts shorter than
/// `t` do not contribute to `b_t`.
pub fn time_baseline(returns: &[Vec<f64>]) -> Vec<f64> {
    let len = returns.iter().map(Vec::len).max().unwrap_or(0);
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for v in returns {
        for (t, &x) in v.iter().enumerate() {
            sum[t] += x;
            count[t] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}
