//! Generalized advantage estimation over (horizon, envs) arrays.
//!
//! The recursion runs in f64 so it agrees with a direct-summation oracle to
//! far below f32 resolution; buffers store the f32 cast.

/// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
/// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// returns = A + V.
///
/// Arrays are [H, E] row-major; `bootstrap` is V of the state after the last
/// step, one entry per env. Dones mark the step that ended an episode and cut
/// both the bootstrap and the advantage recursion.
pub fn compute_gae_f64(
    rewards: &[f32],
    values: &[f32],
    dones: &[f32],
    bootstrap: &[f32],
    gamma: f64,
    lambda: f64,
    horizon: usize,
    envs: usize,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), horizon * envs);
    assert_eq!(values.len(), horizon * envs);
    assert_eq!(dones.len(), horizon * envs);
    assert_eq!(bootstrap.len(), envs);
    let mut advantages = vec![0.0f64; horizon * envs];
    let mut returns = vec![0.0f64; horizon * envs];
    for e in 0..envs {
        let mut next_adv = 0.0f64;
        for t in (0..horizon).rev() {
            let idx = t * envs + e;
            let mask = 1.0 - dones[idx] as f64;
            let next_value = if t == horizon - 1 {
                bootstrap[e] as f64
            } else {
                values[(t + 1) * envs + e] as f64
            };
            let delta = rewards[idx] as f64 + gamma * next_value * mask - values[idx] as f64;
            next_adv = delta + gamma * lambda * mask * next_adv;
            advantages[idx] = next_adv;
            returns[idx] = next_adv + values[idx] as f64;
        }
    }
    (advantages, returns)
}

/// f32 view of the f64 estimator, for rollout buffers.
#[allow(clippy::too_many_arguments)]
pub fn compute_gae(
    rewards: &[f32],
    values: &[f32],
    dones: &[f32],
    bootstrap: &[f32],
    gamma: f32,
    lambda: f32,
    horizon: usize,
    envs: usize,
) -> (Vec<f32>, Vec<f32>) {
    let (a, r) = compute_gae_f64(
        rewards,
        values,
        dones,
        bootstrap,
        gamma as f64,
        lambda as f64,
        horizon,
        envs,
    );
    (
        a.into_iter().map(|v| v as f32).collect(),
        r.into_iter().map(|v| v as f32).collect(),
    )
}

/// Brute-force oracle: A_t = sum_k (gamma*lambda)^k delta_{t+k}, cut at
/// episode boundaries. Lives here so the acceptance suite can reuse it; it
/// shares no code with the recursion above.
pub fn gae_oracle(
    rewards: &[f32],
    values: &[f32],
    dones: &[f32],
    bootstrap: f32,
    gamma: f64,
    lambda: f64,
    horizon: usize,
) -> Vec<f64> {
    let delta = |t: usize| -> f64 {
        let next_v = if t == horizon - 1 {
            bootstrap as f64
        } else {
            values[t + 1] as f64
        };
        rewards[t] as f64 + gamma * next_v * (1.0 - dones[t] as f64) - values[t] as f64
    };
    (0..horizon)
        .map(|t| {
            let mut acc = 0.0f64;
            let mut w = 1.0f64;
            for k in t..horizon {
                acc += w * delta(k);
                if dones[k] > 0.5 {
                    break;
                }
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}
