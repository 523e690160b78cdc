//! Value of service-rate flexibility.
//!
//! `epsilon(x, i) = v(x, i) - v_hat(x, i)` compares the combined problem with
//! the admission-only problem in which the server always runs at the low
//! rate. Both problems are solved on the same truncation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dp::{solve, HorizonSpec, Solution, SolveOptions, Variant};
use crate::error::{Error, Result};
use crate::model::{ModelParams, TruncationSpec};
use crate::structure::{check_pair, Violation, STRUCTURE_SLACK};
use crate::threshold::{Threshold, ThresholdPolicy};

/// Whether the fast server changes the admission decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// `B^s >= B^d + 1`: the fast rate is only used where arrivals are already rejected.
    FlexValueless,
    /// `B^s <= B^d`.
    FlexActive,
}

impl Verdict {
    pub fn of(policy: &ThresholdPolicy) -> Self {
        if policy.service_above_admission() {
            Verdict::FlexValueless
        } else {
            Verdict::FlexActive
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::FlexValueless => f.write_str("valueless"),
            Verdict::FlexActive => f.write_str("active"),
        }
    }
}

/// Solver settings shared by the flexibility drivers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlexibilityOptions {
    pub horizon: HorizonSpec,
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityReport {
    /// `epsilon(x, 0)`.
    pub epsilon_departure: Vec<f64>,
    /// `epsilon(x, 1)`.
    pub epsilon_arrival: Vec<f64>,
    /// `epsilon(0,0) / v_hat(0,0)`, or `epsilon(0,0)` itself when
    /// `v_hat(0,0) <= 0` (see `relative_is_absolute`).
    pub relative_at_origin: f64,
    pub relative_is_absolute: bool,
    pub thresholds_combined: ThresholdPolicy,
    pub threshold_admission_only: Threshold,
    pub verdict: Verdict,
    pub combined: Solution,
    pub admission_only: Solution,
}

impl FlexibilityReport {
    pub fn epsilon(&self, x: usize, i: u8) -> f64 {
        if i == 0 {
            self.epsilon_departure[x]
        } else {
            self.epsilon_arrival[x]
        }
    }

    pub fn truncation(&self) -> TruncationSpec {
        self.combined.truncation
    }

    /// Structural checks on the pair of solutions.
    pub fn violations(&self, model: &ModelParams) -> Vec<Violation> {
        check_pair(&self.combined, &self.admission_only, model, STRUCTURE_SLACK)
    }
}

/// Solves the combined and admission-only problems on a common truncation.
pub fn solve_pair(
    model: &ModelParams,
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Result<(Solution, Solution)> {
    let mut combined = solve(model, trunc, Variant::Combined, opts.horizon, &opts.solve)?;
    let admission =
        solve(model, &combined.truncation, Variant::AdmissionOnly, opts.horizon, &opts.solve)?;
    if admission.truncation.x_max > combined.truncation.x_max {
        combined = solve(model, &admission.truncation, Variant::Combined, opts.horizon, &opts.solve)?;
    }
    Ok((combined, admission))
}

pub fn flexibility(
    model: &ModelParams,
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Result<FlexibilityReport> {
    let (combined, admission_only) = solve_pair(model, trunc, opts)?;
    let diff = |i: u8| -> Vec<f64> {
        combined.values.side(i).iter().zip(admission_only.values.side(i)).map(|(a, b)| a - b).collect()
    };
    let epsilon_departure = diff(0);
    let epsilon_arrival = diff(1);
    let base = admission_only.values.value(0, 0);
    let (relative_at_origin, relative_is_absolute) = if base > 0.0 {
        (epsilon_departure[0] / base, false)
    } else {
        (epsilon_departure[0], true)
    };
    Ok(FlexibilityReport {
        epsilon_departure,
        epsilon_arrival,
        relative_at_origin,
        relative_is_absolute,
        thresholds_combined: combined.policy,
        threshold_admission_only: admission_only.policy.admission,
        verdict: Verdict::of(&combined.policy),
        combined,
        admission_only,
    })
}

/// Outcome of the search for the critical reward.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalReward {
    /// Largest reward known to give [`Verdict::FlexValueless`].
    pub r_tilde_low: f64,
    /// Smallest reward above `r_tilde_low` known to give [`Verdict::FlexActive`].
    pub r_tilde_high: f64,
    /// The coarse scan, in increasing `R`.
    pub scan: Vec<(f64, Verdict)>,
    /// The scan changed verdict exactly once, from valueless to active,
    /// and the bracket was refined by bisection.
    pub single_crossing: bool,
}

impl CriticalReward {
    /// Midpoint of the bracket.
    pub fn r_tilde(&self) -> f64 {
        0.5 * (self.r_tilde_low + self.r_tilde_high)
    }
}

/// Verdict of the combined problem at each reward in `rewards`.
pub fn scan_verdicts(
    model: &ModelParams,
    rewards: &[f64],
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Result<Vec<(f64, Verdict)>> {
    rewards
        .par_iter()
        .map(|&r| {
            let s = solve(&model.with_reward(r), trunc, Variant::Combined, opts.horizon, &opts.solve)?;
            Ok((r, Verdict::of(&s.policy)))
        })
        .collect()
}

/// Locates the reward at which the fast server starts to affect admission.
///
/// The range `[r_min, r_max]` is scanned on a grid of spacing `resolution`
/// (at most 65 points; coarser if the range is wide). If the verdict changes
/// once, from valueless to active, the bracket is refined by bisection down
/// to `resolution`. Otherwise the bracket around the largest valueless
/// sample is returned with `single_crossing = false`.
pub fn critical_reward(
    model: &ModelParams,
    r_min: f64,
    r_max: f64,
    resolution: f64,
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Result<CriticalReward> {
    if !(r_min.is_finite() && r_max.is_finite() && r_min >= 0.0 && r_max >= r_min) {
        return Err(Error::InvalidScan(format!("bad reward range [{r_min}, {r_max}]")));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidScan(format!("resolution must be > 0, got {resolution}")));
    }
    const MAX_POINTS: usize = 65;
    let width = r_max - r_min;
    let intervals = ((width / resolution).floor() as usize).min(MAX_POINTS - 1);
    let rewards: Vec<f64> = if intervals == 0 {
        vec![r_min]
    } else {
        (0..=intervals).map(|k| r_min + width * k as f64 / intervals as f64).collect()
    };
    let scan = scan_verdicts(model, &rewards, trunc, opts)?;
    let changes = scan.windows(2).filter(|w| w[0].1 != w[1].1).count();
    let last_valueless = scan.iter().rposition(|&(_, v)| v == Verdict::FlexValueless);
    let idx = match last_valueless {
        Some(i) if i + 1 < scan.len() => i,
        _ => return Err(Error::NoCrossingInRange),
    };
    let single_crossing = changes == 1;
    let (mut lo, mut hi) = (scan[idx].0, scan[idx + 1].0);
    if single_crossing {
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            let s = solve(&model.with_reward(mid), trunc, Variant::Combined, opts.horizon, &opts.solve)?;
            match Verdict::of(&s.policy) {
                Verdict::FlexValueless => lo = mid,
                Verdict::FlexActive => hi = mid,
            }
        }
    }
    Ok(CriticalReward { r_tilde_low: lo, r_tilde_high: hi, scan, single_crossing })
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Reward,
    ServiceCost,
    MuHigh,
    Lambda,
    Beta,
    /// `delta / mu_low`, i.e. `mu_high = mu_low (1 + value)`.
    DeltaOverMuLow,
}

impl SweepAxis {
    pub fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        let mut m = base.clone();
        match self {
            SweepAxis::Reward => m.reward = value,
            SweepAxis::ServiceCost => m.service_cost = value,
            SweepAxis::MuHigh => m.mu_high = value,
            SweepAxis::Lambda => m.lambda = value,
            SweepAxis::Beta => m.beta = value,
            SweepAxis::DeltaOverMuLow => m.mu_high = m.mu_low * (1.0 + value),
        }
        m
    }

    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Reward => "R",
            SweepAxis::ServiceCost => "c",
            SweepAxis::MuHigh => "mu_high",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Beta => "beta",
            SweepAxis::DeltaOverMuLow => "delta_over_mul",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "R" | "reward" => Ok(SweepAxis::Reward),
            "c" => Ok(SweepAxis::ServiceCost),
            "mu_high" => Ok(SweepAxis::MuHigh),
            "lambda" => Ok(SweepAxis::Lambda),
            "beta" => Ok(SweepAxis::Beta),
            "delta_over_mu_low" | "delta_over_mul" => Ok(SweepAxis::DeltaOverMuLow),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected R, c, mu_high, lambda, beta or delta_over_mu_low)"
            )),
        }
    }
}

/// One solved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub service: Threshold,
    pub admission: Threshold,
    pub admission_only: Threshold,
    pub rel_flex: f64,
    pub rel_flex_is_absolute: bool,
    pub verdict: Verdict,
    pub x_max: usize,
    pub violations: Vec<Violation>,
}

/// Flexibility along one parameter axis. Rows come back sorted by value;
/// a failing point keeps its error and does not stop the sweep.
pub fn sweep(
    base: &ModelParams,
    axis: SweepAxis,
    values: &[f64],
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Vec<(f64, Result<SweepRow>)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .par_iter()
        .map(|&value| {
            let row = (|| {
                let model = axis.apply(base, value);
                let rep = flexibility(&model, trunc, opts)?;
                Ok(SweepRow {
                    value,
                    service: rep.thresholds_combined.service,
                    admission: rep.thresholds_combined.admission,
                    admission_only: rep.threshold_admission_only,
                    rel_flex: rep.relative_at_origin,
                    rel_flex_is_absolute: rep.relative_is_absolute,
                    verdict: rep.verdict,
                    x_max: rep.truncation().x_max,
                    violations: rep.violations(&model),
                })
            })();
            (value, row)
        })
        .collect()
}
