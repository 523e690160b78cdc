//! Random instances shared by the integration tests.

#![allow(dead_code)]

use flexq::{HoldingCost, ModelParams, RewardTiming};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rates in `[0.5, 20]`, `beta` in `[0.1, 2]`, `h = K x^m` with `m` in `{1, 2, 3}`.
///
/// `reward_cap` is a multiple of `c / delta`: `Some(1.0)` draws `R <= c / delta`.
pub fn random_instance(rng: &mut ChaCha8Rng, reward_cap: Option<f64>, timing: RewardTiming) -> ModelParams {
    let lambda = rng.gen_range(0.5..=20.0);
    let mu_low = rng.gen_range(0.5..19.5);
    let mu_high = rng.gen_range(mu_low + 0.25..=20.0f64.max(mu_low + 0.5));
    let service_cost = rng.gen_range(0.5..=20.0);
    let beta = rng.gen_range(0.1..=2.0);
    let m = f64::from(rng.gen_range(1..=3u8));
    let k = rng.gen_range(0.5..=2.0);
    let ratio = service_cost / (mu_high - mu_low);
    let reward = match reward_cap {
        Some(cap) => rng.gen_range(0.0..=cap * ratio),
        None => rng.gen_range(0.0..=3.0 * ratio + 10.0),
    };
    ModelParams {
        lambda,
        mu_low,
        mu_high,
        service_cost,
        reward,
        beta,
        holding: HoldingCost::Power { k, m },
        reward_timing: timing,
    }
}

/// Largest `k` with `f[k] <= theta`, `-1` if none, `None` if the last entry qualifies.
pub fn sup_below(f: &[f64], theta: f64) -> Option<i64> {
    let mut best = -1i64;
    for (k, &v) in f.iter().enumerate() {
        if v <= theta {
            best = k as i64;
        }
    }
    if f.last().is_some_and(|&v| v <= theta) {
        None
    } else {
        Some(best)
    }
}

/// `|a - b| <= tol (1 + |a| + |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs() + b.abs())
}
