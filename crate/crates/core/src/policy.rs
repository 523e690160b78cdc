//! Exact evaluation of stationary policies.
//!
//! Under a fixed policy the arrival-epoch values are either
//! `R + v(x+1, 0)` (admit) or `v(x, 0)` (reject), so they can be eliminated
//! and the remaining unknowns `v(0..=x_max, 0)` satisfy a tridiagonal,
//! strictly diagonally dominant system. At `x_max` arrivals are rejected.
//!
//! [`evaluate_relative`] solves the same system in relative coordinates
//! `w(x, i) = v(x, i) - v(0, 0)`, `g = beta v(0, 0)`, which stays well
//! conditioned as `beta -> 0` and at `beta = 0` becomes the average-reward
//! evaluation equations.

use crate::dp::Variant;
use crate::error::{Error, Result};
use crate::model::{ModelParams, RewardTiming};
use crate::threshold::ThresholdPolicy;
use crate::tridiag::Tridiagonal;

/// Per-state actions on `0..=x_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationaryPolicy {
    /// Fast service in state `(x, 0)`; ignored at `x = 0`.
    pub fast: Vec<bool>,
    /// Admission in state `(x, 1)`; forced to `false` at `x_max`.
    pub admit: Vec<bool>,
}

impl StationaryPolicy {
    pub fn from_thresholds(policy: &ThresholdPolicy, x_max: usize) -> Self {
        Self {
            fast: (0..=x_max).map(|x| policy.serves_fast(x)).collect(),
            admit: (0..=x_max).map(|x| x < x_max && policy.admits(x)).collect(),
        }
    }

    pub fn x_max(&self) -> usize {
        self.fast.len() - 1
    }
}

/// Values of a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub policy: ThresholdPolicy,
    pub variant: Variant,
    /// `v(x, 0)` for `x = 0..=x_max`.
    pub departure_side: Vec<f64>,
    /// `v(x, 1)` for `x = 0..=x_max`.
    pub arrival_side: Vec<f64>,
}

impl PolicyValue {
    pub fn value(&self, x: usize, i: u8) -> f64 {
        if i == 0 {
            self.departure_side[x]
        } else {
            self.arrival_side[x]
        }
    }

    pub fn x_max(&self) -> usize {
        self.departure_side.len() - 1
    }
}

/// Relative values and gain of a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeValue {
    /// `w(x, 0)`, with `w(0, 0) = 0`.
    pub departure_side: Vec<f64>,
    /// `w(x, 1)`.
    pub arrival_side: Vec<f64>,
    /// `beta v(0, 0)`; the long-run average profit when `beta = 0`.
    pub gain: f64,
}

/// Coefficients shared by the evaluation systems.
struct Rates {
    lambda: f64,
    mu_low: f64,
    mu_high: f64,
    delta: f64,
    cost: f64,
    admit_reward: f64,
    departure_reward: f64,
}

impl Rates {
    fn new(model: &ModelParams) -> Self {
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
        }
    }
}

/// Builds `(Lambda + beta) v(x,0) - [transitions] = [one-period profit]`
/// with the `(x, 1)` unknowns eliminated. Returns the matrix and rhs.
#[allow(clippy::needless_range_loop)]
fn build_system(
    model: &ModelParams,
    policy: &StationaryPolicy,
    beta: f64,
) -> (Tridiagonal, Vec<f64>) {
    let r = Rates::new(model);
    let n = policy.x_max() + 1;
    let s = model.max_rate() + beta;
    let mut a = Tridiagonal::zeros(n);
    let mut b = vec![0.0; n];
    for x in 0..n {
        let mut diag = s;
        // Arrivals.
        if policy.admit[x] {
            a.upper[x] -= r.lambda;
            b[x] += r.lambda * r.admit_reward;
        } else {
            diag -= r.lambda;
        }
        if x == 0 {
            diag -= r.mu_high;
        } else {
            b[x] -= model.holding.value(x);
            a.lower[x] -= r.mu_low;
            b[x] += r.mu_low * r.departure_reward;
            if policy.fast[x] {
                b[x] -= r.cost;
                a.lower[x] -= r.delta;
                b[x] += r.delta * r.departure_reward;
            } else {
                diag -= r.delta;
            }
        }
        a.diag[x] = diag;
    }
    (a, b)
}

fn arrival_side(model: &ModelParams, policy: &StationaryPolicy, v0: &[f64]) -> Vec<f64> {
    let reward = match model.reward_timing {
        RewardTiming::AtAdmission => model.reward,
        RewardTiming::AtDeparture => 0.0,
    };
    (0..v0.len())
        .map(|x| if policy.admit[x] { reward + v0[x + 1] } else { v0[x] })
        .collect()
}

/// Discounted values of an arbitrary stationary policy on `0..=x_max`.
pub fn evaluate_stationary(model: &ModelParams, policy: &StationaryPolicy) -> Result<(Vec<f64>, Vec<f64>)> {
    model.validate()?;
    let (a, b) = build_system(model, policy, model.beta);
    let v0 = a.solve(&b)?;
    let v1 = arrival_side(model, policy, &v0);
    Ok((v0, v1))
}

/// Exact discounted value of a threshold policy on the truncation `0..=x_max`.
///
/// For [`Variant::AdmissionOnly`] the service threshold is ignored and the
/// low rate is used everywhere.
pub fn evaluate_threshold_policy(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    x_max: usize,
    variant: Variant,
) -> Result<PolicyValue> {
    if x_max < 1 {
        return Err(Error::PolicyOutOfRange("x_max must be at least 1".into()));
    }
    let effective = match variant {
        Variant::Combined => *policy,
        Variant::AdmissionOnly => ThresholdPolicy::admission_only(policy.admission),
    };
    for (name, t) in [("service", effective.service), ("admission", effective.admission)] {
        if let Some(b) = t.finite() {
            if b > x_max as i64 {
                return Err(Error::PolicyOutOfRange(format!(
                    "{name} threshold {b} exceeds x_max = {x_max}"
                )));
            }
        }
    }
    let stationary = StationaryPolicy::from_thresholds(&effective, x_max);
    let (v0, v1) = evaluate_stationary(model, &stationary)?;
    Ok(PolicyValue { policy: effective, variant, departure_side: v0, arrival_side: v1 })
}

/// Relative values `w` and gain `g` of a stationary policy at discount rate
/// `beta >= 0`. With `beta = 0` this solves the average-reward evaluation
/// equations `Lambda w(x) = r(x) - g + sum_y q(x,y) w(y)`.
///
/// Requires the policy to admit at `x = 0` or not; in the latter case the
/// empty state is absorbing and the gain is zero.
#[allow(clippy::needless_range_loop)]
pub fn evaluate_relative(
    model: &ModelParams,
    policy: &StationaryPolicy,
    beta: f64,
) -> Result<RelativeValue> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter { name: "beta", reason: format!("must be >= 0, got {beta}") });
    }
    let r = Rates::new(model);
    let (a, b) = build_system(model, policy, beta);
    let n = a.len();
    if n == 1 {
        return Ok(RelativeValue { departure_side: vec![0.0], arrival_side: vec![0.0], gain: 0.0 });
    }
    // Substitute v = w + g / beta. Row x >= 1 becomes
    //   a_x w = b_x - g (row sum of transitions / beta + ...)  ==  b_x - g
    // because (Lambda + beta) - sum of transition coefficients = beta.
    // Unknowns w(1..=x_max); w(0) = 0 moves the lower entry of row 1 out.
    let m = n - 1;
    let mut inner = Tridiagonal::zeros(m);
    let mut rhs_const = vec![0.0; m];
    let rhs_gain = vec![-1.0; m];
    for k in 0..m {
        let x = k + 1;
        inner.diag[k] = a.diag[x];
        inner.upper[k] = a.upper[x];
        inner.lower[k] = if k > 0 { a.lower[x] } else { 0.0 };
        rhs_const[k] = b[x];
    }
    let sols = inner.solve_many(&[&rhs_const, &rhs_gain])?;
    let (base, per_gain) = (&sols[0], &sols[1]);
    // Row 0: (Lambda + beta) v0 = lambda v(0,1) + mu_high v0  =>  g = lambda w(0,1).
    let gain = if policy.admit[0] {
        // g = lambda (R + w(1)) with w(1) = base + g per_gain.
        let denom = 1.0 - r.lambda * per_gain[0];
        if denom == 0.0 {
            return Err(Error::SingularSystem(0));
        }
        r.lambda * (r.admit_reward + base[0]) / denom
    } else {
        0.0
    };
    let mut w0 = Vec::with_capacity(n);
    w0.push(0.0);
    w0.extend(base.iter().zip(per_gain).map(|(u, e)| u + gain * e));
    let w1 = arrival_side(model, policy, &w0);
    Ok(RelativeValue { departure_side: w0, arrival_side: w1, gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HoldingCost;
    use crate::threshold::Threshold;
    use nalgebra::{DMatrix, DVector};

    fn model() -> ModelParams {
        ModelParams {
            lambda: 5.0,
            mu_low: 3.0,
            mu_high: 5.0,
            service_cost: 6.0,
            reward: 4.0,
            beta: 0.5,
            holding: HoldingCost::quadratic(),
            reward_timing: RewardTiming::AtAdmission,
        }
    }

    /// Dense solve over all 2(x_max + 1) unknowns, written straight from the
    /// evaluation equations with no elimination.
    fn dense_oracle(model: &ModelParams, policy: &StationaryPolicy) -> (Vec<f64>, Vec<f64>) {
        let n = policy.x_max() + 1;
        let idx = |x: usize, i: usize| 2 * x + i;
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut b = DVector::<f64>::zeros(2 * n);
        let s = model.max_rate() + model.beta;
        let (ra, rd) = match model.reward_timing {
            RewardTiming::AtAdmission => (model.reward, 0.0),
            RewardTiming::AtDeparture => (0.0, model.reward),
        };
        for x in 0..n {
            // (x, 1)
            a[(idx(x, 1), idx(x, 1))] = 1.0;
            if policy.admit[x] {
                a[(idx(x, 1), idx(x + 1, 0))] = -1.0;
                b[idx(x, 1)] = ra;
            } else {
                a[(idx(x, 1), idx(x, 0))] -= 1.0;
            }
            // (x, 0)
            let row = idx(x, 0);
            a[(row, row)] += s;
            a[(row, idx(x, 1))] -= model.lambda;
            if x == 0 {
                a[(row, row)] -= model.mu_high;
            } else {
                b[row] -= model.holding.value(x);
                a[(row, idx(x - 1, 0))] -= model.mu_low;
                b[row] += model.mu_low * rd;
                if policy.fast[x] {
                    b[row] -= model.service_cost;
                    a[(row, idx(x - 1, 0))] -= model.delta();
                    b[row] += model.delta() * rd;
                } else {
                    a[(row, row)] -= model.delta();
                }
            }
        }
        let sol = a.lu().solve(&b).expect("nonsingular");
        ((0..n).map(|x| sol[idx(x, 0)]).collect(), (0..n).map(|x| sol[idx(x, 1)]).collect())
    }

    #[test]
    fn thomas_elimination_matches_dense_system() {
        for timing in [RewardTiming::AtAdmission, RewardTiming::AtDeparture] {
            let m = model().with_timing(timing);
            for (bs, bd) in [(3, 1), (0, 4), (9, 9), (2, -1)] {
                let p = ThresholdPolicy::new(Threshold::Finite(bs), Threshold::Finite(bd));
                let sp = StationaryPolicy::from_thresholds(&p, 12);
                let (v0, v1) = evaluate_stationary(&m, &sp).unwrap();
                let (d0, d1) = dense_oracle(&m, &sp);
                for x in 0..=12 {
                    assert!((v0[x] - d0[x]).abs() < 1e-9, "{timing:?} {bs} {bd} x={x}");
                    assert!((v1[x] - d1[x]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reject_all_from_empty_is_worth_nothing() {
        let v = evaluate_threshold_policy(&ThresholdPolicy::reject_all(), &model(), 20, Variant::Combined)
            .unwrap();
        assert_eq!(v.value(0, 0), 0.0);
        assert_eq!(v.value(0, 1), 0.0);
        assert!(v.value(3, 0) < 0.0);
    }

    #[test]
    fn relative_form_reproduces_discounted_values() {
        let m = model();
        let p = ThresholdPolicy::new(Threshold::Finite(3), Threshold::Finite(5));
        let sp = StationaryPolicy::from_thresholds(&p, 20);
        let (v0, v1) = evaluate_stationary(&m, &sp).unwrap();
        let rel = evaluate_relative(&m, &sp, m.beta).unwrap();
        assert!((rel.gain - m.beta * v0[0]).abs() < 1e-10);
        for x in 0..=20 {
            assert!((rel.departure_side[x] - (v0[x] - v0[0])).abs() < 1e-8);
            assert!((rel.arrival_side[x] - (v1[x] - v0[0])).abs() < 1e-8);
        }
    }

    #[test]
    fn average_gain_of_admit_below_one_matches_birth_death_formula() {
        // Admit only in the empty system, slow service: a two-state chain
        // 0 <-> 1 with rates lambda and mu_low. Gain = lambda R p0 - h(1) p1.
        let m = model();
        let p = ThresholdPolicy::new(Threshold::Unbounded, Threshold::Finite(0));
        let sp = StationaryPolicy::from_thresholds(&p, 10);
        let rel = evaluate_relative(&m, &sp, 0.0).unwrap();
        let p0 = m.mu_low / (m.lambda + m.mu_low);
        let p1 = 1.0 - p0;
        let expected = m.lambda * m.reward * p0 - 1.0 * p1;
        assert!((rel.gain - expected).abs() < 1e-12, "{} vs {expected}", rel.gain);
    }

    #[test]
    fn policy_outside_truncation_is_rejected() {
        let p = ThresholdPolicy::new(Threshold::Finite(30), Threshold::Finite(2));
        assert!(matches!(
            evaluate_threshold_policy(&p, &model(), 10, Variant::Combined),
            Err(Error::PolicyOutOfRange(_))
        ));
    }
}
