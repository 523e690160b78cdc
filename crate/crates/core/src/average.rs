//! Long-run average profit by the vanishing-discount method.
//!
//! The discounted problem is solved along `beta_n = beta0 * shrink^n`. At
//! each stage the discount-optimal policy is found by policy improvement in
//! relative coordinates `w = v - v(0,0)`, `g = beta v(0,0)`: plain value
//! iteration needs about `Lambda / beta` sweeps and its absolute values grow
//! like `1 / beta`, so neither its run time nor its stopping test survive
//! `beta` of order `1e-7`. The relative system stays well conditioned all the
//! way to `beta = 0`.
//!
//! Once the gain and the thresholds settle, the stabilized policy is
//! evaluated at `beta = 0`, which gives `g*` and the limiting relative value
//! `w`. The pair is then checked against the average-reward optimality
//! inequalities as a certificate.

use crate::dp::{extract_thresholds, solve, HorizonSpec, Kernel, SolveOptions, ValueFunction, Variant};
use crate::error::{Error, Result};
use crate::model::{ModelParams, RewardTiming, TruncationSpec};
use crate::policy::{evaluate_relative, RelativeValue, StationaryPolicy};
use crate::threshold::ThresholdPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageOptions {
    pub beta0: f64,
    pub shrink: f64,
    /// Bound on `|g_n - g_{n-1}|` and on the certificate residuals.
    pub stop_tol: f64,
    /// Bound on the spread of `beta_n v(x, i)` over [`SAMPLED_STATES`].
    pub spread_tol: f64,
    pub max_stages: usize,
    pub solve: SolveOptions,
}

impl Default for AverageOptions {
    fn default() -> Self {
        Self { beta0: 1.0, shrink: 0.5, stop_tol: 1e-6, spread_tol: 1e-4, max_stages: 30, solve: SolveOptions::default() }
    }
}

/// States used to measure how far `beta v_beta(x, i)` is from constant.
pub const SAMPLED_STATES: [(usize, u8); 10] =
    [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1), (4, 0), (4, 1)];

/// Residuals of the optimality inequalities at `(w, g)`, on interior states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Largest amount by which `w` exceeds the right-hand side.
    pub inequality_violation: f64,
    /// Largest `|w - rhs|`: how far the stabilized policy is from attaining the max.
    pub greedy_gap: f64,
    /// Largest state checked.
    pub limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRewardResult {
    /// Average profit per unit time of the stabilized policy.
    pub g_star: f64,
    pub beta_sequence: Vec<f64>,
    /// `beta_n v_{beta_n}(0, 0)` per stage.
    pub g_trace: Vec<f64>,
    /// `max |beta_n v(x,i) - beta_n v(0,0)|` over [`SAMPLED_STATES`], per stage.
    pub spread_trace: Vec<f64>,
    pub threshold_trace: Vec<ThresholdPolicy>,
    /// `w(x, 0) = v(x, 0) - v(0, 0)` at the final discount rate.
    pub relative_departure: Vec<f64>,
    /// `w(x, 1)` at the final discount rate.
    pub relative_arrival: Vec<f64>,
    /// Relative values of the stabilized policy at `beta = 0`.
    pub limit_departure: Vec<f64>,
    pub limit_arrival: Vec<f64>,
    pub policy: ThresholdPolicy,
    pub stabilized: bool,
    pub certificate: Certificate,
    pub truncation: TruncationSpec,
}

impl AverageRewardResult {
    pub fn relative_value(&self, x: usize, i: u8) -> f64 {
        if i == 0 {
            self.relative_departure[x]
        } else {
            self.relative_arrival[x]
        }
    }

    pub fn final_spread(&self) -> f64 {
        *self.spread_trace.last().unwrap_or(&f64::NAN)
    }
}

const MAX_IMPROVEMENTS: usize = 1000;

/// Discount-optimal stationary policy at rate `beta` by policy iteration,
/// starting from `start`.
fn optimal_at(
    model: &ModelParams,
    beta: f64,
    start: StationaryPolicy,
) -> Result<(StationaryPolicy, RelativeValue)> {
    let kernel = Kernel::new(model, start.x_max(), Variant::Combined);
    let mut policy = start;
    for _ in 0..MAX_IMPROVEMENTS {
        let rv = evaluate_relative(model, &policy, beta)?;
        let next = kernel.improve(&rv.departure_side, &policy);
        if next == policy {
            return Ok((policy, rv));
        }
        policy = next;
    }
    Err(Error::NoConvergence(MAX_IMPROVEMENTS))
}

fn thresholds_of(model: &ModelParams, rv: &RelativeValue) -> Result<ThresholdPolicy> {
    let v = ValueFunction {
        departure_side: rv.departure_side.clone(),
        arrival_side: rv.arrival_side.clone(),
        horizon: crate::dp::Horizon::Finite(0),
        variant: Variant::Combined,
        reward_timing: model.reward_timing,
        extrapolated_cost: false,
    };
    extract_thresholds(&v.burden(), model, Variant::Combined)
}

fn spread(beta: f64, rv: &RelativeValue) -> f64 {
    SAMPLED_STATES
        .iter()
        .filter(|(x, _)| *x < rv.departure_side.len())
        .map(|&(x, i)| {
            let w = if i == 0 { rv.departure_side[x] } else { rv.arrival_side[x] };
            (beta * w).abs()
        })
        .fold(0.0, f64::max)
}

/// Residuals of
///
/// ```text
/// w(x,1) <= max{ r_a + w(x+1,0), w(x,0) }
/// w(x,0) <= [-h(x) - g + lambda w(x,1) + mu_l (r_d + w(x-1,0))
///            + max{ delta w(x,0), -c + delta (r_d + w(x-1,0)) }] / Lambda
/// w(0,0) <= [-g + lambda w(0,1) + mu_h w(0,0)] / Lambda
/// ```
///
/// for `x <= limit`.
pub fn optimality_certificate(
    model: &ModelParams,
    w0: &[f64],
    w1: &[f64],
    g: f64,
    limit: usize,
) -> Certificate {
    let (r_a, r_d) = match model.reward_timing {
        RewardTiming::AtAdmission => (model.reward, 0.0),
        RewardTiming::AtDeparture => (0.0, model.reward),
    };
    let big = model.max_rate();
    let delta = model.delta();
    let limit = limit.min(w0.len().saturating_sub(2));
    let mut violation: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut record = |lhs: f64, rhs: f64| {
        violation = violation.max(lhs - rhs);
        gap = gap.max((lhs - rhs).abs());
    };
    for x in 0..=limit {
        record(w1[x], (r_a + w0[x + 1]).max(w0[x]));
        let rhs0 = if x == 0 {
            (-g + model.lambda * w1[0] + model.mu_high * w0[0]) / big
        } else {
            let low = delta * w0[x];
            let high = -model.service_cost + delta * (r_d + w0[x - 1]);
            (-model.holding.value(x) - g
                + model.lambda * w1[x]
                + model.mu_low * (r_d + w0[x - 1])
                + low.max(high))
                / big
        };
        record(w0[x], rhs0);
    }
    Certificate { inequality_violation: violation.max(0.0), greedy_gap: gap, limit }
}

/// Vanishing-discount solution of the average-profit problem.
///
/// Stops at the first stage `n >= 1` where `|g_n - g_{n-1}| <= stop_tol`
/// and the thresholds equal those of stage `n - 1`, once `beta_n v` is flat
/// to within `spread_tol` on the sampled states.
pub fn average_reward(
    model: &ModelParams,
    trunc: &TruncationSpec,
    opts: &AverageOptions,
) -> Result<AverageRewardResult> {
    if !(opts.beta0.is_finite() && opts.beta0 > 0.0) {
        return Err(Error::InvalidParameter { name: "average.beta0", reason: format!("must be > 0, got {}", opts.beta0) });
    }
    if !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::InvalidParameter {
            name: "average.shrink",
            reason: format!("must lie in (0, 1), got {}", opts.shrink),
        });
    }
    if !(opts.stop_tol.is_finite() && opts.stop_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "average.stop_tol",
            reason: format!("must be > 0, got {}", opts.stop_tol),
        });
    }
    if !(opts.spread_tol.is_finite() && opts.spread_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "average.spread_tol",
            reason: format!("must be > 0, got {}", opts.spread_tol),
        });
    }
    // The first stage doubles as the growth-condition check and picks the truncation.
    let first_model = model.with_beta(opts.beta0);
    let first = solve(&first_model, trunc, Variant::Combined, HorizonSpec::Infinite, &opts.solve)?;
    let mut t = first.truncation;
    let mut policy = StationaryPolicy::from_thresholds(&first.policy, t.x_max);

    let mut beta_sequence = Vec::new();
    let mut g_trace = Vec::new();
    let mut spread_trace = Vec::new();
    let mut threshold_trace: Vec<ThresholdPolicy> = Vec::new();
    let mut last_rv = None;
    let mut stabilized = false;

    let mut beta = opts.beta0;
    for n in 0..opts.max_stages {
        let stage_model = model.with_beta(beta);
        let (rv, thresholds) = loop {
            let (p, rv) = optimal_at(&stage_model, beta, policy.clone())?;
            let thresholds = thresholds_of(&stage_model, &rv)?;
            if !thresholds.admission.too_close_to(t.x_max, t.safety_margin) {
                policy = p;
                break (rv, thresholds);
            }
            if t.x_max * 2 > opts.solve.max_x_max.max(trunc.x_max) {
                return Err(Error::TruncationTooTight {
                    which: "admission",
                    threshold: thresholds.admission.to_string(),
                    margin: t.safety_margin,
                    x_max: t.x_max,
                });
            }
            t.x_max *= 2;
            policy = StationaryPolicy::from_thresholds(&thresholds, t.x_max);
        };
        beta_sequence.push(beta);
        g_trace.push(rv.gain);
        spread_trace.push(spread(beta, &rv));
        threshold_trace.push(thresholds);
        last_rv = Some(rv);
        if n >= 1 {
            let dg = (g_trace[n] - g_trace[n - 1]).abs();
            let flat = spread_trace[n] < opts.spread_tol;
            if dg <= opts.stop_tol && flat && threshold_trace[n] == threshold_trace[n - 1] {
                stabilized = true;
                break;
            }
        }
        beta *= opts.shrink;
    }
    if !stabilized {
        return Err(Error::NotStabilized(opts.max_stages));
    }
    let rv = last_rv.expect("at least two stages ran");
    let final_policy = *threshold_trace.last().expect("at least two stages ran");
    let limit_policy = StationaryPolicy::from_thresholds(&final_policy, t.x_max);
    let limit = evaluate_relative(model, &limit_policy, 0.0)?;
    let certificate = optimality_certificate(
        model,
        &limit.departure_side,
        &limit.arrival_side,
        limit.gain,
        t.interior_limit(),
    );
    Ok(AverageRewardResult {
        g_star: limit.gain,
        beta_sequence,
        g_trace,
        spread_trace,
        threshold_trace,
        relative_departure: rv.departure_side,
        relative_arrival: rv.arrival_side,
        limit_departure: limit.departure_side,
        limit_arrival: limit.arrival_side,
        policy: final_policy,
        stabilized,
        certificate,
        truncation: t,
    })
}
