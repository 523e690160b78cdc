//! Computational checks of the structural properties of optimal solutions.
//!
//! Every check runs on `x <= limit`, where `limit` is normally
//! `x_max - safety_margin`: states near the truncation edge feel the forced
//! rejection at `x_max` and are excluded. Comparisons use a slack of
//! `slack * (1 + |a| + |b|)` so that they stay meaningful for large values.

use std::fmt;

use crate::dp::{greedy_policy, Solution, Variant};
use crate::model::{ModelParams, RewardTiming};
use crate::threshold::ThresholdPolicy;

/// Default comparison slack.
pub const STRUCTURE_SLACK: f64 = 1e-9;

/// The property that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    /// `v(x, i) >= v(x+1, i)`.
    ValueMonotone,
    /// `Delta(x, i) <= Delta(x+1, i)`.
    BurdenMonotone,
    /// `epsilon(x, i) >= 0`.
    FlexibilityNonnegative,
    /// `epsilon(x, i) <= epsilon(x+1, i)`.
    FlexibilityMonotone,
    /// `B^d_hat <= B^d`.
    AdmissionOrder,
    /// `B^d + 1 <= B^s` when `R <= c / delta`.
    ServiceAboveAdmission,
    /// Greedy action differs from the threshold action.
    GreedyMismatch,
    /// Fast service chosen in the empty state.
    FastAtEmpty,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Property::ValueMonotone => "value-monotone",
            Property::BurdenMonotone => "burden-monotone",
            Property::FlexibilityNonnegative => "flexibility-nonnegative",
            Property::FlexibilityMonotone => "flexibility-monotone",
            Property::AdmissionOrder => "admission-order",
            Property::ServiceAboveAdmission => "service-above-admission",
            Property::GreedyMismatch => "greedy-mismatch",
            Property::FastAtEmpty => "fast-at-empty",
        };
        f.write_str(s)
    }
}

/// One failed comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub property: Property,
    pub x: usize,
    pub i: u8,
    /// How far past the slack the comparison failed (0 for discrete checks).
    pub excess: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at ({}, {}) by {:e}", self.property, self.x, self.i, self.excess)
    }
}

fn tolerance(slack: f64, a: f64, b: f64) -> f64 {
    slack * (1.0 + a.abs() + b.abs())
}

/// Flags `x` where `s[x] < s[x+1]` beyond slack, for `x + 1 <= limit`.
fn nonincreasing(s: &[f64], limit: usize, slack: f64, property: Property, i: u8) -> Vec<Violation> {
    let end = limit.min(s.len().saturating_sub(1));
    (0..end)
        .filter_map(|x| {
            let excess = s[x + 1] - s[x] - tolerance(slack, s[x], s[x + 1]);
            (excess > 0.0).then_some(Violation { property, x, i, excess })
        })
        .collect()
}

fn nondecreasing(s: &[f64], limit: usize, slack: f64, property: Property, i: u8) -> Vec<Violation> {
    let end = limit.min(s.len().saturating_sub(1));
    (0..end)
        .filter_map(|x| {
            let excess = s[x] - s[x + 1] - tolerance(slack, s[x], s[x + 1]);
            (excess > 0.0).then_some(Violation { property, x, i, excess })
        })
        .collect()
}

/// `v(x, i)` nonincreasing in `x` on `0..=limit`.
pub fn check_value_monotone(v0: &[f64], v1: &[f64], limit: usize, slack: f64) -> Vec<Violation> {
    let mut out = nonincreasing(v0, limit, slack, Property::ValueMonotone, 0);
    out.extend(nonincreasing(v1, limit, slack, Property::ValueMonotone, 1));
    out
}

/// `Delta(x, i) = v(x, i) - v(x+1, i)` nondecreasing in `x` for `x + 1 < limit`.
///
/// Equivalent to concavity of `v(., i)`. Differences are compared through
/// second differences of `v` so that the slack refers to value magnitudes.
pub fn check_burden_monotone(v0: &[f64], v1: &[f64], limit: usize, slack: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, v) in [(0u8, v0), (1u8, v1)] {
        let end = limit.min(v.len().saturating_sub(1));
        for x in 0..end.saturating_sub(1) {
            let left = v[x] - v[x + 1];
            let right = v[x + 1] - v[x + 2];
            let scale = v[x].abs().max(v[x + 1].abs()).max(v[x + 2].abs());
            let excess = left - right - tolerance(slack, scale, scale);
            if excess > 0.0 {
                out.push(Violation { property: Property::BurdenMonotone, x, i, excess });
            }
        }
    }
    out
}

/// `epsilon = v - v_hat` nonnegative and nondecreasing on `0..=limit`.
pub fn check_flexibility(eps0: &[f64], eps1: &[f64], limit: usize, slack: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, e) in [(0u8, eps0), (1u8, eps1)] {
        for (x, &val) in e.iter().enumerate().take(limit + 1) {
            let excess = -val - slack;
            if excess > 0.0 {
                out.push(Violation { property: Property::FlexibilityNonnegative, x, i, excess });
            }
        }
        out.extend(nondecreasing(e, limit, slack, Property::FlexibilityMonotone, i));
    }
    out
}

/// Greedy actions of the optimality equations equal the threshold actions
/// on `0..=limit`, and the empty state is served slowly.
pub fn check_greedy_agreement(solution: &Solution, model: &ModelParams, limit: usize) -> Vec<Violation> {
    let greedy = greedy_policy(&solution.values, model);
    let p = &solution.policy;
    let mut out = Vec::new();
    let end = limit.min(solution.values.x_max());
    for x in 0..=end {
        if greedy.fast[x] != p.serves_fast(x) && solution.values.variant == Variant::Combined {
            out.push(Violation { property: Property::GreedyMismatch, x, i: 0, excess: 0.0 });
        }
        if x < solution.values.x_max() && greedy.admit[x] != p.admits(x) {
            out.push(Violation { property: Property::GreedyMismatch, x, i: 1, excess: 0.0 });
        }
    }
    if greedy.fast[0] {
        out.push(Violation { property: Property::FastAtEmpty, x: 0, i: 0, excess: 0.0 });
    }
    out
}

/// `B^d + 1 <= B^s` whenever the reward is paid on admission and `R <= c / delta`.
pub fn check_service_above_admission(policy: &ThresholdPolicy, model: &ModelParams) -> Vec<Violation> {
    let applies = model.reward_timing == RewardTiming::AtAdmission
        && model.reward <= model.cost_per_extra_rate();
    if applies && !policy.service_above_admission() {
        vec![Violation { property: Property::ServiceAboveAdmission, x: 0, i: 0, excess: 0.0 }]
    } else {
        Vec::new()
    }
}

/// The checks that apply to one solved instance.
///
/// Value monotonicity is only asserted for admission-timed rewards; with
/// departure rewards an extra customer can be worth more than it costs.
pub fn check_solution(solution: &Solution, model: &ModelParams, slack: f64) -> Vec<Violation> {
    let limit = solution.truncation.interior_limit().min(solution.values.x_max());
    let v = &solution.values;
    let mut out = Vec::new();
    if model.reward_timing == RewardTiming::AtAdmission {
        out.extend(check_value_monotone(&v.departure_side, &v.arrival_side, limit, slack));
    }
    out.extend(check_burden_monotone(&v.departure_side, &v.arrival_side, limit, slack));
    out.extend(check_greedy_agreement(solution, model, limit));
    if v.variant == Variant::Combined {
        out.extend(check_service_above_admission(&solution.policy, model));
    }
    out
}

/// Checks on a pair of solves (combined and admission-only) sharing a truncation.
pub fn check_pair(
    combined: &Solution,
    admission_only: &Solution,
    model: &ModelParams,
    slack: f64,
) -> Vec<Violation> {
    let mut out = check_solution(combined, model, slack);
    out.extend(check_solution(admission_only, model, slack));
    let limit = combined.truncation.interior_limit().min(combined.values.x_max());
    let eps = |i: u8| -> Vec<f64> {
        combined
            .values
            .side(i)
            .iter()
            .zip(admission_only.values.side(i))
            .map(|(a, b)| a - b)
            .collect()
    };
    out.extend(check_flexibility(&eps(0), &eps(1), limit, slack));
    if admission_only.policy.admission > combined.policy.admission {
        out.push(Violation { property: Property::AdmissionOrder, x: 0, i: 0, excess: 0.0 });
    }
    out
}
