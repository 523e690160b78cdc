//! Dynamic programming for the combined admission / service-rate problem,
//! the admission-only restriction and the departure-reward variant.
//!
//! One transition of the uniformized model maps `v` to `T v`:
//!
//! ```text
//! (T v)(0, 0) = [lambda v(0,1) + mu_h v(0,0)] / (Lambda + beta)
//! (T v)(x, 0) = [-h(x) + lambda v(x,1) + mu_l (r_d + v(x-1,0))
//!                + max{ delta v(x,0), -c + delta (r_d + v(x-1,0)) }] / (Lambda + beta)
//! (T v)(x, 1) = max{ r_a + (T v)(x+1,0), (T v)(x,0) }
//! ```
//!
//! with `(r_a, r_d) = (R, 0)` when the reward is paid on admission and
//! `(0, R)` when it is paid on departure. The arrival-epoch values use the
//! *new* departure-epoch values: an admission decision moves the state
//! instantaneously. The admission-only restriction drops the second branch
//! of the max. Arrivals are rejected at `x_max`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{uniformize, validate_assumption1, HoldingCost, ModelParams, RewardTiming, TruncationSpec};
use crate::policy::StationaryPolicy;
use crate::threshold::{threshold_t, Threshold, ThresholdPolicy};

/// Which control problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Admission and service-rate control.
    Combined,
    /// Admission control with the low rate frozen.
    AdmissionOnly,
}

/// How a value function was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// `n` transitions remaining, starting from `v_0 = 0`.
    Finite(usize),
    /// Value-iteration fixed point; `residual` is the last sup-norm change.
    InfiniteFixedPoint { residual: f64, iterations: usize },
}

/// Requested horizon for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HorizonSpec {
    #[default]
    Infinite,
    Steps(usize),
}

/// Value iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target sup-norm distance to the true fixed point.
    pub tol: f64,
    pub max_iters: usize,
    /// Largest truncation the adaptive solver may grow to.
    pub max_x_max: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 2_000_000, max_x_max: 512 }
    }
}

/// `v(x, i)` on `x = 0..=x_max`, `i` in `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    /// `v(x, 0)`: departure (non-arrival) epochs.
    pub departure_side: Vec<f64>,
    /// `v(x, 1)`: arrival epochs, before the admission decision.
    pub arrival_side: Vec<f64>,
    pub horizon: Horizon,
    pub variant: Variant,
    pub reward_timing: RewardTiming,
    /// The holding cost table was extended past its last entry.
    pub extrapolated_cost: bool,
}

impl ValueFunction {
    pub fn zero(x_max: usize, variant: Variant, reward_timing: RewardTiming) -> Self {
        Self {
            departure_side: vec![0.0; x_max + 1],
            arrival_side: vec![0.0; x_max + 1],
            horizon: Horizon::Finite(0),
            variant,
            reward_timing,
            extrapolated_cost: false,
        }
    }

    pub fn x_max(&self) -> usize {
        self.departure_side.len() - 1
    }

    pub fn value(&self, x: usize, i: u8) -> f64 {
        self.side(i)[x]
    }

    pub fn side(&self, i: u8) -> &[f64] {
        if i == 0 {
            &self.departure_side
        } else {
            &self.arrival_side
        }
    }

    pub fn burden(&self) -> BurdenFunction {
        burden_of(self)
    }

    /// Writes `x,i,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "i", "value"])?;
        for x in 0..=self.x_max() {
            for i in 0..2u8 {
                w.write_record([x.to_string(), i.to_string(), format!("{:.12}", self.value(x, i))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `Delta(x, i) = v(x, i) - v(x+1, i)` for `x = 0..x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurdenFunction {
    pub departure_side: Vec<f64>,
    pub arrival_side: Vec<f64>,
}

impl BurdenFunction {
    pub fn side(&self, i: u8) -> &[f64] {
        if i == 0 {
            &self.departure_side
        } else {
            &self.arrival_side
        }
    }
}

pub fn burden_of(v: &ValueFunction) -> BurdenFunction {
    let diff = |s: &[f64]| s.windows(2).map(|w| w[0] - w[1]).collect();
    BurdenFunction { departure_side: diff(&v.departure_side), arrival_side: diff(&v.arrival_side) }
}

/// One Bellman transition, specialised to a model and truncation.
pub(crate) struct Kernel {
    lambda: f64,
    mu_low: f64,
    mu_high: f64,
    delta: f64,
    cost: f64,
    admit_reward: f64,
    departure_reward: f64,
    scale: f64,
    holding: Vec<f64>,
    variant: Variant,
}

impl Kernel {
    pub(crate) fn new(model: &ModelParams, x_max: usize, variant: Variant) -> Self {
        let (admit_reward, departure_reward) = match model.reward_timing {
            RewardTiming::AtAdmission => (model.reward, 0.0),
            RewardTiming::AtDeparture => (0.0, model.reward),
        };
        Self {
            lambda: model.lambda,
            mu_low: model.mu_low,
            mu_high: model.mu_high,
            delta: model.delta(),
            cost: model.service_cost,
            admit_reward,
            departure_reward,
            scale: 1.0 / (model.max_rate() + model.beta),
            holding: model.holding.table(x_max),
            variant,
        }
    }

    /// `(low, high)` branch values at departure-side state `x > 0`.
    #[inline]
    fn service_branches(&self, v0: &[f64], x: usize) -> (f64, f64) {
        let low = self.delta * v0[x];
        let high = -self.cost + self.delta * (self.departure_reward + v0[x - 1]);
        (low, high)
    }

    /// Whether the fast rate is strictly better at `(x, 0)` against `v0`.
    #[inline]
    pub(crate) fn prefers_fast(&self, v0: &[f64], x: usize) -> bool {
        if x == 0 || self.variant == Variant::AdmissionOnly {
            return false;
        }
        let (low, high) = self.service_branches(v0, x);
        high > low
    }

    /// Whether admitting is at least as good at `(x, 1)` against `v0`.
    #[inline]
    pub(crate) fn prefers_admit(&self, v0: &[f64], x: usize) -> bool {
        x + 1 < v0.len() && self.admit_reward + v0[x + 1] >= v0[x]
    }

    pub(crate) fn step(&self, v0: &[f64], v1: &[f64], out0: &mut [f64], out1: &mut [f64]) {
        let n = v0.len();
        out0[0] = (self.lambda * v1[0] + self.mu_high * v0[0]) * self.scale;
        for x in 1..n {
            let (low, high) = self.service_branches(v0, x);
            let service = match self.variant {
                Variant::Combined => low.max(high),
                Variant::AdmissionOnly => low,
            };
            out0[x] = (-self.holding[x]
                + self.lambda * v1[x]
                + self.mu_low * (self.departure_reward + v0[x - 1])
                + service)
                * self.scale;
        }
        for x in 0..n - 1 {
            out1[x] = (self.admit_reward + out0[x + 1]).max(out0[x]);
        }
        out1[n - 1] = out0[n - 1];
    }

    /// Policy-improvement step against `v0`: an action changes only if the
    /// alternative is better by more than rounding noise.
    pub(crate) fn improve(&self, v0: &[f64], current: &StationaryPolicy) -> StationaryPolicy {
        let n = v0.len();
        let beats = |alt: f64, cur: f64| alt > cur + 1e-12 * (1.0 + alt.abs() + cur.abs());
        let mut next = current.clone();
        for x in 0..n {
            next.fast[x] = if x > 0 && self.variant == Variant::Combined {
                let (low, high) = self.service_branches(v0, x);
                if current.fast[x] {
                    !beats(low, high)
                } else {
                    beats(high, low)
                }
            } else {
                false
            };
            next.admit[x] = if x + 1 < n {
                let (admit, reject) = (self.admit_reward + v0[x + 1], v0[x]);
                if current.admit[x] {
                    !beats(reject, admit)
                } else {
                    beats(admit, reject)
                }
            } else {
                false
            };
        }
        next
    }

    /// Greedy actions of the optimality equations against `v`.
    pub(crate) fn greedy(&self, v0: &[f64]) -> StationaryPolicy {
        let n = v0.len();
        StationaryPolicy {
            fast: (0..n).map(|x| self.prefers_fast(v0, x)).collect(),
            admit: (0..n).map(|x| self.prefers_admit(v0, x)).collect(),
        }
    }
}

fn check_x_max(x_max: usize) -> Result<()> {
    if x_max < 2 {
        return Err(Error::InvalidTruncation(format!("x_max must be >= 2, got {x_max}")));
    }
    Ok(())
}

/// `v_0, v_1, ..., v_n` of the finite-horizon recursion on `0..=x_max`.
pub fn finite_horizon_iterate(
    model: &ModelParams,
    n_steps: usize,
    x_max: usize,
    variant: Variant,
) -> Result<Vec<ValueFunction>> {
    model.validate()?;
    check_x_max(x_max)?;
    let kernel = Kernel::new(model, x_max, variant);
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut current = ValueFunction::zero(x_max, variant, model.reward_timing);
    current.extrapolated_cost = model.holding.extrapolates(x_max);
    out.push(current.clone());
    for n in 1..=n_steps {
        let mut next = current.clone();
        kernel.step(
            &current.departure_side,
            &current.arrival_side,
            &mut next.departure_side,
            &mut next.arrival_side,
        );
        next.horizon = Horizon::Finite(n);
        out.push(next.clone());
        current = next;
    }
    Ok(out)
}

/// `v_n` only.
pub fn finite_horizon(
    model: &ModelParams,
    n_steps: usize,
    x_max: usize,
    variant: Variant,
) -> Result<ValueFunction> {
    model.validate()?;
    check_x_max(x_max)?;
    let kernel = Kernel::new(model, x_max, variant);
    let mut a = ValueFunction::zero(x_max, variant, model.reward_timing);
    a.extrapolated_cost = model.holding.extrapolates(x_max);
    let mut b = a.clone();
    for _ in 0..n_steps {
        kernel.step(&a.departure_side, &a.arrival_side, &mut b.departure_side, &mut b.arrival_side);
        std::mem::swap(&mut a, &mut b);
    }
    a.horizon = Horizon::Finite(n_steps);
    Ok(a)
}

/// Value iteration on a fixed truncation.
///
/// Stops once the sup-norm change `r` satisfies `r <= tol (1 - alpha) / alpha`,
/// which bounds the distance of the returned iterate to the fixed point by
/// `tol`. The target is floored at sixteen ulps of the largest value, below
/// which successive iterates only differ by rounding.
pub fn value_iteration(
    model: &ModelParams,
    x_max: usize,
    variant: Variant,
    opts: &SolveOptions,
) -> Result<ValueFunction> {
    let u = uniformize(model)?;
    check_x_max(x_max)?;
    let kernel = Kernel::new(model, x_max, variant);
    let target = opts.tol * (1.0 - u.alpha) / u.alpha;
    let mut a = ValueFunction::zero(x_max, variant, model.reward_timing);
    a.extrapolated_cost = model.holding.extrapolates(x_max);
    let mut b = a.clone();
    for iter in 1..=opts.max_iters {
        kernel.step(&a.departure_side, &a.arrival_side, &mut b.departure_side, &mut b.arrival_side);
        let mut change: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (new, old) in b
            .departure_side
            .iter()
            .zip(&a.departure_side)
            .chain(b.arrival_side.iter().zip(&a.arrival_side))
        {
            change = change.max((new - old).abs());
            scale = scale.max(new.abs());
        }
        std::mem::swap(&mut a, &mut b);
        if change <= target.max(16.0 * f64::EPSILON * scale) {
            polish(model, &kernel, &mut a);
            a.horizon = Horizon::InfiniteFixedPoint { residual: change, iterations: iter };
            return Ok(a);
        }
    }
    Err(Error::NoConvergence(opts.max_iters))
}

/// Replaces a converged iterate by the exact value of its greedy policy,
/// improving until the policy is stable. Kept only if it lowers the
/// Bellman residual, so a failed linear solve leaves `v` untouched.
fn polish(model: &ModelParams, kernel: &Kernel, v: &mut ValueFunction) {
    let before = optimality_residual_with(kernel, v);
    let mut policy = kernel.greedy(&v.departure_side);
    let mut best = None;
    for _ in 0..POLISH_ROUNDS {
        let Ok((v0, v1)) = crate::policy::evaluate_stationary(model, &policy) else {
            return;
        };
        let next = kernel.improve(&v0, &policy);
        let stable = next == policy;
        best = Some((v0, v1));
        if stable {
            break;
        }
        policy = next;
    }
    if let Some((v0, v1)) = best {
        let mut candidate = v.clone();
        candidate.departure_side = v0;
        candidate.arrival_side = v1;
        if optimality_residual_with(kernel, &candidate) <= before {
            *v = candidate;
        }
    }
}

const POLISH_ROUNDS: usize = 8;

fn optimality_residual_with(kernel: &Kernel, v: &ValueFunction) -> f64 {
    let mut t0 = v.departure_side.clone();
    let mut t1 = v.arrival_side.clone();
    kernel.step(&v.departure_side, &v.arrival_side, &mut t0, &mut t1);
    (0..v.x_max())
        .map(|x| (t0[x] - v.departure_side[x]).abs().max((t1[x] - v.arrival_side[x]).abs()))
        .fold(0.0, f64::max)
}

/// Greedy stationary policy of the optimality equations against `v`.
pub fn greedy_policy(v: &ValueFunction, model: &ModelParams) -> StationaryPolicy {
    Kernel::new(model, v.x_max(), v.variant).greedy(&v.departure_side)
}

/// `sup |T v - v|` over `x < x_max`, both epoch types.
pub fn optimality_residual(v: &ValueFunction, model: &ModelParams) -> f64 {
    optimality_residual_with(&Kernel::new(model, v.x_max(), v.variant), v)
}

/// Slack allowed when checking monotonicity of a computed burden.
pub const BURDEN_SLACK: f64 = 1e-8;

/// Thresholds from the departure-side burden.
///
/// * admission timing: `B^s = 1 + T(c/delta)`, `B^d = T(R)`
/// * departure timing: `B^s = 1 + T(c/delta - R)`, `B^d = T(0)`
///
/// The admission-only variant returns `B^s = inf` (always slow).
pub fn extract_thresholds(
    burden: &BurdenFunction,
    model: &ModelParams,
    variant: Variant,
) -> Result<ThresholdPolicy> {
    let d = &burden.departure_side;
    for x in 0..d.len().saturating_sub(1) {
        let tol = BURDEN_SLACK * (1.0 + d[x].abs());
        if d[x] > d[x + 1] + tol {
            return Err(Error::NonMonotoneBurden { x, left: d[x], right: d[x + 1] });
        }
    }
    let (service_level, admission_level) = match model.reward_timing {
        RewardTiming::AtAdmission => (model.cost_per_extra_rate(), model.reward),
        RewardTiming::AtDeparture => (model.cost_per_extra_rate() - model.reward, 0.0),
    };
    let admission = threshold_t(d, admission_level);
    let service = match variant {
        Variant::Combined => threshold_t(d, service_level).plus_one(),
        Variant::AdmissionOnly => Threshold::Unbounded,
    };
    Ok(ThresholdPolicy { service, admission })
}

/// States `x` whose departure-side burden lies within `10 tol` of a decision
/// level, where a threshold could flip under a slightly different solve.
pub fn near_ties(v: &ValueFunction, model: &ModelParams, limit: usize, tol: f64) -> Vec<usize> {
    let (service_level, admission_level) = match model.reward_timing {
        RewardTiming::AtAdmission => (model.cost_per_extra_rate(), model.reward),
        RewardTiming::AtDeparture => (model.cost_per_extra_rate() - model.reward, 0.0),
    };
    let d = v.burden().departure_side;
    (0..d.len().min(limit + 1))
        .filter(|&x| {
            let near_admission = (d[x] - admission_level).abs() < 10.0 * tol;
            let near_service =
                v.variant == Variant::Combined && (d[x] - service_level).abs() < 10.0 * tol;
            near_admission || near_service
        })
        .collect()
}

/// A solved instance: the value function, its thresholds and the truncation used.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: ValueFunction,
    pub policy: ThresholdPolicy,
    pub truncation: TruncationSpec,
}

fn solve_once(
    model: &ModelParams,
    x_max: usize,
    variant: Variant,
    horizon: HorizonSpec,
    opts: &SolveOptions,
) -> Result<ValueFunction> {
    match horizon {
        HorizonSpec::Infinite => value_iteration(model, x_max, variant, opts),
        HorizonSpec::Steps(n) => finite_horizon(model, n, x_max, variant),
    }
}

/// Solves with adaptive truncation.
///
/// Starting at `trunc.x_max`, the cap is doubled (up to `opts.max_x_max`)
/// until the admission threshold, and any finite service threshold, sit at
/// least `trunc.safety_margin` states below it. A service threshold that
/// stays unbounded at the largest cap is reported as `inf`.
pub fn solve(
    model: &ModelParams,
    trunc: &TruncationSpec,
    variant: Variant,
    horizon: HorizonSpec,
    opts: &SolveOptions,
) -> Result<Solution> {
    trunc.validate()?;
    if horizon == HorizonSpec::Infinite {
        validate_assumption1(model)?;
    } else {
        model.validate()?;
    }
    let mut t = *trunc;
    loop {
        let values = solve_once(model, t.x_max, variant, horizon, opts)?;
        let policy = extract_thresholds(&values.burden(), model, variant)?;
        let admission_tight = policy.admission.too_close_to(t.x_max, t.safety_margin);
        let service_tight = variant == Variant::Combined
            && policy.service.too_close_to(t.x_max, t.safety_margin);
        if !admission_tight && !service_tight {
            return Ok(Solution { values, policy, truncation: t });
        }
        let can_grow = t.x_max * 2 <= opts.max_x_max.max(trunc.x_max);
        if !can_grow {
            if !admission_tight && policy.service.is_unbounded() {
                return Ok(Solution { values, policy, truncation: t });
            }
            let (which, threshold) = if admission_tight {
                ("admission", policy.admission)
            } else {
                ("service", policy.service)
            };
            return Err(Error::TruncationTooTight {
                which,
                threshold: threshold.to_string(),
                margin: t.safety_margin,
                x_max: t.x_max,
            });
        }
        t.x_max *= 2;
    }
}

/// Infinite-horizon discounted solve with adaptive truncation.
pub fn solve_discounted(
    model: &ModelParams,
    trunc: &TruncationSpec,
    variant: Variant,
    opts: &SolveOptions,
) -> Result<Solution> {
    solve(model, trunc, variant, HorizonSpec::Infinite, opts)
}

/// Convenience for the common quadratic-cost instances.
pub fn quadratic_model(
    lambda: f64,
    mu_low: f64,
    mu_high: f64,
    service_cost: f64,
    reward: f64,
    beta: f64,
) -> ModelParams {
    ModelParams {
        lambda,
        mu_low,
        mu_high,
        service_cost,
        reward,
        beta,
        holding: HoldingCost::quadratic(),
        reward_timing: RewardTiming::AtAdmission,
    }
}
