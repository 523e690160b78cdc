//! Problem instance for the controlled M/M/1 queue.
//!
//! Customers arrive at rate `lambda`. Each arrival is admitted or rejected;
//! an admitted customer pays a reward `R`. The single server runs at
//! `mu_low` for free or at `mu_high` for an extra cost rate `c`. The queue
//! pays a holding cost `h(x)` per unit time with `h(0) = 0`.
//!
//! Uniformizing at the maximal event rate `Lambda = lambda + mu_high` gives
//! an equivalent discrete-time model with discount factor
//! `Lambda / (Lambda + beta)`. All per-period quantities are divided by
//! `Lambda + beta`, so values are always in the original time units.

use std::fmt;

use crate::error::{Error, Result};

/// When the per-customer reward is collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RewardTiming {
    #[default]
    AtAdmission,
    AtDeparture,
}

impl fmt::Display for RewardTiming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardTiming::AtAdmission => f.write_str("admission"),
            RewardTiming::AtDeparture => f.write_str("departure"),
        }
    }
}

/// Holding cost rate as a function of the number in system.
#[derive(Debug, Clone, PartialEq)]
pub enum HoldingCost {
    /// `h(x) = K x^m`
    Power { k: f64, m: f64 },
    /// `h(x) = K rho^x - K`, shifted so that `h(0) = 0`.
    Exponential { k: f64, rho: f64 },
    /// Explicit values `h(0), h(1), ...`; extended past the end with the last slope.
    Tabular(Vec<f64>),
}

impl HoldingCost {
    pub fn quadratic() -> Self {
        HoldingCost::Power { k: 1.0, m: 2.0 }
    }

    /// Checks parameter ranges, `h(0) = 0`, strict increase at the origin and
    /// convexity of the table.
    pub fn validate(&self) -> Result<()> {
        match self {
            HoldingCost::Power { k, m } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidHoldingCost(format!("power: K must be > 0, got {k}")));
                }
                if !(m.is_finite() && *m >= 1.0) {
                    return Err(Error::InvalidHoldingCost(format!("power: m must be >= 1, got {m}")));
                }
            }
            HoldingCost::Exponential { k, rho } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidHoldingCost(format!(
                        "exponential: K must be > 0, got {k}"
                    )));
                }
                if !(rho.is_finite() && *rho > 1.0) {
                    return Err(Error::InvalidHoldingCost(format!(
                        "exponential: rho must be > 1, got {rho}"
                    )));
                }
            }
            HoldingCost::Tabular(values) => {
                if values.len() < 2 {
                    return Err(Error::InvalidHoldingCost(
                        "tabular: need at least h(0) and h(1)".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidHoldingCost("tabular: non-finite entry".into()));
                }
                if values[0] != 0.0 {
                    return Err(Error::InvalidHoldingCost(format!(
                        "tabular: h(0) must be 0, got {}",
                        values[0]
                    )));
                }
                if values[1] <= 0.0 {
                    return Err(Error::InvalidHoldingCost(
                        "tabular: h must be increasing (h(1) > h(0) = 0)".into(),
                    ));
                }
                for x in 1..values.len() - 1 {
                    let left = values[x] - values[x - 1];
                    let right = values[x + 1] - values[x];
                    if right < left {
                        return Err(Error::NonConvexCost { x, left, right });
                    }
                }
            }
        }
        Ok(())
    }

    /// `h(x)`. Tabular costs past the end of the table are extrapolated
    /// linearly with the last increment.
    pub fn value(&self, x: usize) -> f64 {
        match self {
            HoldingCost::Power { k, m } => {
                if x == 0 {
                    0.0
                } else {
                    k * (x as f64).powf(*m)
                }
            }
            HoldingCost::Exponential { k, rho } => k * (rho.powi(x as i32) - 1.0),
            HoldingCost::Tabular(values) => match values.get(x) {
                Some(v) => *v,
                None => {
                    let n = values.len();
                    let slope = values[n - 1] - values[n - 2];
                    values[n - 1] + slope * (x - (n - 1)) as f64
                }
            },
        }
    }

    /// Like [`value`](Self::value) but refuses to extrapolate a table.
    pub fn try_value(&self, x: usize) -> Result<f64> {
        if let HoldingCost::Tabular(values) = self {
            if x >= values.len() {
                return Err(Error::TabularOutOfRange { x, len: values.len() });
            }
        }
        Ok(self.value(x))
    }

    /// `h(0..=x_max)`.
    pub fn table(&self, x_max: usize) -> Vec<f64> {
        (0..=x_max).map(|x| self.value(x)).collect()
    }

    /// Whether evaluating up to `x_max` uses extrapolated table entries.
    pub fn extrapolates(&self, x_max: usize) -> bool {
        matches!(self, HoldingCost::Tabular(v) if x_max >= v.len())
    }

    /// `h(x + 1) - h(x)`.
    pub fn increment(&self, x: usize) -> f64 {
        self.value(x + 1) - self.value(x)
    }
}

impl fmt::Display for HoldingCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoldingCost::Power { k, m } => write!(f, "power(K={k}, m={m})"),
            HoldingCost::Exponential { k, rho } => write!(f, "exponential(K={k}, rho={rho})"),
            HoldingCost::Tabular(v) => write!(f, "tabular({} entries)", v.len()),
        }
    }
}

/// Parameters of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    /// Extra cost rate of the high service speed (`c_h - c_l`, with `c_l = 0`).
    pub service_cost: f64,
    pub reward: f64,
    /// Continuous-time discount rate.
    pub beta: f64,
    pub holding: HoldingCost,
    pub reward_timing: RewardTiming,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {v}") })
            }
        }
        fn nonneg(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {v}") })
            }
        }
        positive("lambda", self.lambda)?;
        positive("mu_low", self.mu_low)?;
        positive("mu_high", self.mu_high)?;
        positive("beta", self.beta)?;
        nonneg("c", self.service_cost)?;
        nonneg("reward", self.reward)?;
        if self.mu_high <= self.mu_low {
            return Err(Error::InvalidParameter {
                name: "mu_high",
                reason: format!("must exceed mu_low = {}, got {}", self.mu_low, self.mu_high),
            });
        }
        self.holding.validate()
    }

    /// `mu_high - mu_low`.
    pub fn delta(&self) -> f64 {
        self.mu_high - self.mu_low
    }

    /// Uniformization rate `lambda + mu_high`.
    pub fn max_rate(&self) -> f64 {
        self.lambda + self.mu_high
    }

    /// `c / delta`, the burden level above which the fast server pays off.
    pub fn cost_per_extra_rate(&self) -> f64 {
        self.service_cost / self.delta()
    }

    pub fn with_reward(&self, reward: f64) -> Self {
        Self { reward, ..self.clone() }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn with_timing(&self, reward_timing: RewardTiming) -> Self {
        Self { reward_timing, ..self.clone() }
    }
}

/// Discrete-time coefficients after uniformization at `Lambda = lambda + mu_high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizedModel {
    pub p_arrival: f64,
    pub p_low_service: f64,
    pub p_extra_service: f64,
    /// Probability of a fictitious self-transition in the empty system.
    pub p_self_empty: f64,
    /// Discount factor per transition.
    pub alpha: f64,
    /// Multiplier applied to cost rates to obtain per-period costs.
    pub cost_scale: f64,
}

impl UniformizedModel {
    /// `beta / (Lambda + beta)`: the mass that leaves through discounting.
    pub fn discount_mass(&self) -> f64 {
        1.0 - self.alpha
    }
}

pub fn uniformize(model: &ModelParams) -> Result<UniformizedModel> {
    model.validate()?;
    let denom = model.max_rate() + model.beta;
    Ok(UniformizedModel {
        p_arrival: model.lambda / denom,
        p_low_service: model.mu_low / denom,
        p_extra_service: model.delta() / denom,
        p_self_empty: model.mu_high / denom,
        alpha: model.max_rate() / denom,
        cost_scale: 1.0 / denom,
    })
}

/// State-space cap and the gap required between thresholds and the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationSpec {
    pub x_max: usize,
    pub safety_margin: usize,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self { x_max: 64, safety_margin: 8 }
    }
}

impl TruncationSpec {
    pub fn new(x_max: usize, safety_margin: usize) -> Result<Self> {
        let t = Self { x_max, safety_margin };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_max < self.safety_margin + 2 {
            return Err(Error::InvalidTruncation(format!(
                "x_max = {} must be at least safety_margin + 2 = {}",
                self.x_max,
                self.safety_margin + 2
            )));
        }
        Ok(())
    }

    /// Largest state that structural checks look at.
    pub fn interior_limit(&self) -> usize {
        self.x_max - self.safety_margin
    }
}

/// Outcome of checking the holding-cost growth condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Verdict {
    pub holds: bool,
    /// `sup_{x>0} h(x+1)/h(x)`.
    pub theta: f64,
    /// Smallest number of transitions `J` for which the contraction holds.
    pub j: u64,
    /// The contraction factor achieved at `J`.
    pub alpha_bound: f64,
    /// Tabular costs are only checked up to the end of the table.
    pub finite_prefix_only: bool,
}

const J_SCAN_LIMIT: u64 = 1_000_000;

/// Checks the growth conditions that make the discounted problem well posed:
/// `h(x+1) <= theta h(x)` and
/// `Lambda'^J [R + c + h(x+J)] <= alpha [R + c + h(x)]` with `alpha < 1`,
/// where `Lambda' = Lambda / (Lambda + beta)` is the rate on the time scale
/// where `Lambda + beta = 1`.
///
/// When `R + c = 0` the weight `1 + h(x)` is used instead of `R + c + h(x)`.
pub fn validate_assumption1(model: &ModelParams) -> Result<Assumption1Verdict> {
    model.validate()?;
    let h = &model.holding;
    let lam_n = model.max_rate() / (model.max_rate() + model.beta);
    let offset = if model.reward + model.service_cost > 0.0 {
        model.reward + model.service_cost
    } else {
        1.0
    };
    let weight = |x: u64| offset + hval(h, x);

    let (theta, asymptote_rate, finite_prefix_only): (f64, Box<dyn Fn(u64) -> f64>, bool) = match h
    {
        HoldingCost::Power { k, m } => {
            // h(x+1)/h(x) = (1 + 1/x)^m is largest at x = 1.
            let _ = k;
            (2f64.powf(*m), Box::new(|_| 1.0), false)
        }
        HoldingCost::Exponential { rho, .. } => {
            if rho * lam_n >= 1.0 {
                return Err(Error::AssumptionViolated(format!(
                    "exponential growth rho = {rho} needs rho < 1/Lambda' = {}",
                    1.0 / lam_n
                )));
            }
            // (rho^{x+1} - 1)/(rho^x - 1) decreases from rho + 1 at x = 1 to rho.
            let rho = *rho;
            (rho + 1.0, Box::new(move |j| rho.powf(j as f64)), false)
        }
        HoldingCost::Tabular(values) => {
            let mut theta: f64 = 1.0;
            for x in 1..values.len() - 1 {
                theta = theta.max(values[x + 1] / values[x]);
            }
            (theta, Box::new(|_| 1.0), true)
        }
    };

    let sample_points: Vec<u64> = (0..=32u64).chain((6..=12).map(|p| 1u64 << p)).collect();
    let ratio_sup = |j: u64| -> f64 {
        let sampled = sample_points
            .iter()
            .map(|&x| weight(x + j) / weight(x))
            .fold(f64::MIN, f64::max);
        sampled.max(asymptote_rate(j))
    };
    let factor = |j: u64| lam_n.powf(j as f64) * ratio_sup(j);

    let mut found = None;
    for j in 1..=J_SCAN_LIMIT {
        let a = factor(j);
        if a < 1.0 {
            found = Some((j, a));
            break;
        }
    }
    if found.is_none() {
        // Past the scan window: the factor is eventually decreasing, so a
        // doubling search followed by bisection finds the first success.
        let mut hi = J_SCAN_LIMIT * 2;
        while factor(hi) >= 1.0 {
            if hi > u64::MAX / 4 {
                return Err(Error::AssumptionViolated(
                    "no finite J makes the growth condition contract".into(),
                ));
            }
            hi *= 2;
        }
        let mut lo = J_SCAN_LIMIT;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if factor(mid) < 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        found = Some((hi, factor(hi)));
    }
    let (j, alpha_bound) = found.expect("search always sets a value");
    Ok(Assumption1Verdict { holds: true, theta, j, alpha_bound, finite_prefix_only })
}

fn hval(h: &HoldingCost, x: u64) -> f64 {
    match h {
        HoldingCost::Power { k, m } => {
            if x == 0 {
                0.0
            } else {
                k * (x as f64).powf(*m)
            }
        }
        HoldingCost::Exponential { k, rho } => k * (rho.powf(x as f64) - 1.0),
        HoldingCost::Tabular(_) => h.value(x as usize),
    }
}
