//! Continuous-time Monte Carlo simulation of a threshold policy.
//!
//! The queue is simulated event by event with exponential clocks at the
//! current total rate. Holding and service costs are integrated in closed
//! form between events, so the only error besides sampling noise is the
//! tail cut of the discounted estimator, which is bounded explicitly.
//!
//! Random numbers come from ChaCha8 seeded with `seed`; replication `k`
//! uses stream `k` of that generator, so results do not depend on thread
//! scheduling and are reproducible across runs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelParams, RewardTiming};
use crate::threshold::{Threshold, ThresholdPolicy};

/// What is being estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimHorizon {
    /// Discounted profit, cut once the remaining discounted mass is below
    /// `epsilon_tail` relative to `|accumulated| + 1`.
    DiscountedEffective { epsilon_tail: f64 },
    /// Average profit per unit time over `[0, t_end]`.
    TimeAverage { t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    pub horizon: SimHorizon,
    /// `(x, i)`; with `i = 1` an arrival is waiting for a decision at time 0.
    pub initial_state: (usize, u8),
    /// Fraction of `t_end` discarded before batching.
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl SimConfig {
    pub fn discounted(seed: u64, replications: usize, epsilon_tail: f64) -> Self {
        Self {
            seed,
            replications,
            horizon: SimHorizon::DiscountedEffective { epsilon_tail },
            initial_state: (0, 0),
            warmup_fraction: 0.1,
            batches: 32,
        }
    }

    pub fn time_average(seed: u64, replications: usize, t_end: f64) -> Self {
        Self { horizon: SimHorizon::TimeAverage { t_end }, ..Self::discounted(seed, replications, 1e-6) }
    }

    pub fn with_initial_state(mut self, x: usize, i: u8) -> Self {
        self.initial_state = (x, i);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidSimConfig("replications must be >= 1".into()));
        }
        if self.initial_state.1 > 1 {
            return Err(Error::InvalidSimConfig(format!("i must be 0 or 1, got {}", self.initial_state.1)));
        }
        match self.horizon {
            SimHorizon::DiscountedEffective { epsilon_tail } => {
                if !(epsilon_tail > 0.0 && epsilon_tail < 1.0) {
                    return Err(Error::InvalidSimConfig(format!(
                        "epsilon_tail must lie in (0, 1), got {epsilon_tail}"
                    )));
                }
            }
            SimHorizon::TimeAverage { t_end } => {
                if !(t_end.is_finite() && t_end > 0.0) {
                    return Err(Error::InvalidSimConfig(format!("T must be > 0, got {t_end}")));
                }
                if !(0.0..1.0).contains(&self.warmup_fraction) {
                    return Err(Error::InvalidSimConfig(format!(
                        "warm-up fraction must lie in [0, 1), got {}",
                        self.warmup_fraction
                    )));
                }
                if self.batches == 0 {
                    return Err(Error::InvalidSimConfig("batches must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Sample mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub replications_used: usize,
}

impl SimEstimate {
    /// Whether `value` lies within `k` half-widths of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.half_width_95
    }
}

/// One line of an event trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub event: EventKind,
    /// Number in system after the event.
    pub x: usize,
    /// Service rate in force after the event: `true` for the high rate.
    pub fast: bool,
    /// Whether an arrival in the new state would be admitted.
    pub admit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Start,
    Admit,
    Reject,
    Departure,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Admit => "admit",
            EventKind::Reject => "reject",
            EventKind::Departure => "departure",
        }
    }
}

/// Sum with pairwise splitting, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn estimate(samples: &[f64], replications: usize) -> SimEstimate {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
    let var = if samples.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    SimEstimate { mean, half_width_95: 1.96 * (var / n).sqrt(), replications_used: replications }
}

fn rng_for(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

/// `int_0^tau e^{-beta (t + s)} ds`.
fn discounted_length(beta: f64, t: f64, tau: f64) -> f64 {
    (-beta * t).exp() * -(-beta * tau).exp_m1() / beta
}

/// The state machine shared by both estimators.
struct Queue<'a> {
    policy: &'a ThresholdPolicy,
    model: &'a ModelParams,
    x: usize,
}

impl Queue<'_> {
    fn fast(&self) -> bool {
        self.policy.serves_fast(self.x)
    }

    fn service_rate(&self) -> f64 {
        if self.x == 0 {
            0.0
        } else if self.fast() {
            self.model.mu_high
        } else {
            self.model.mu_low
        }
    }

    fn cost_rate(&self) -> f64 {
        let service = if self.x > 0 && self.fast() { self.model.service_cost } else { 0.0 };
        self.model.holding.value(self.x) + service
    }

    /// Handles an arrival; returns the reward earned now.
    fn arrival(&mut self) -> (EventKind, f64) {
        if self.policy.admits(self.x) {
            self.x += 1;
            let r = match self.model.reward_timing {
                RewardTiming::AtAdmission => self.model.reward,
                RewardTiming::AtDeparture => 0.0,
            };
            (EventKind::Admit, r)
        } else {
            (EventKind::Reject, 0.0)
        }
    }

    fn departure(&mut self) -> (EventKind, f64) {
        self.x -= 1;
        let r = match self.model.reward_timing {
            RewardTiming::AtAdmission => 0.0,
            RewardTiming::AtDeparture => self.model.reward,
        };
        (EventKind::Departure, r)
    }

    /// Samples the next holding time and event.
    fn next(&mut self, rng: &mut ChaCha8Rng) -> (f64, EventKind, f64) {
        let mu = self.service_rate();
        let rate = self.model.lambda + mu;
        let tau = exponential(rng, rate);
        let (kind, reward) = if rng.gen::<f64>() * rate < self.model.lambda {
            self.arrival()
        } else {
            self.departure()
        };
        (tau, kind, reward)
    }

    fn trace(&self, t: f64, event: EventKind) -> TraceEvent {
        TraceEvent { t, event, x: self.x, fast: self.fast(), admit: self.policy.admits(self.x) }
    }
}

/// Upper bound on the profit rate reachable from `x` in magnitude.
fn tail_rate(model: &ModelParams, policy: &ThresholdPolicy, x: usize) -> f64 {
    let cap = match policy.admission {
        Threshold::Finite(b) => x.max((b + 1).max(0) as usize),
        Threshold::Unbounded => x + 64,
    };
    model.reward * model.lambda.max(model.mu_high) + model.service_cost + model.holding.value(cap)
}

fn discounted_replication(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    cfg: &SimConfig,
    epsilon_tail: f64,
    replication: usize,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> f64 {
    let mut rng = rng_for(cfg.seed, replication);
    let beta = model.beta;
    let mut q = Queue { policy, model, x: cfg.initial_state.0 };
    let mut acc = 0.0;
    let mut t = 0.0;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(q.trace(0.0, EventKind::Start));
    }
    if cfg.initial_state.1 == 1 {
        let (kind, reward) = q.arrival();
        acc += reward;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(q.trace(0.0, kind));
        }
    }
    loop {
        let remaining = (-beta * t).exp() * tail_rate(model, policy, q.x) / beta;
        if remaining <= epsilon_tail * (acc.abs() + 1.0) {
            return acc;
        }
        let cost = q.cost_rate();
        let (tau, kind, reward) = q.next(&mut rng);
        acc -= cost * discounted_length(beta, t, tau);
        t += tau;
        acc += reward * (-beta * t).exp();
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(q.trace(t, kind));
        }
    }
}

/// Batch means of the profit rate over `[warm-up, t_end]`.
fn average_replication(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    cfg: &SimConfig,
    t_end: f64,
    replication: usize,
) -> Vec<f64> {
    let mut rng = rng_for(cfg.seed, replication);
    let mut q = Queue { policy, model, x: cfg.initial_state.0 };
    let start = cfg.warmup_fraction * t_end;
    let width = (t_end - start) / cfg.batches as f64;
    let mut totals = vec![0.0; cfg.batches];
    let batch_of = |t: f64| (((t - start) / width).floor() as usize).min(cfg.batches - 1);
    if cfg.initial_state.1 == 1 {
        let (_, reward) = q.arrival();
        if start == 0.0 {
            totals[0] += reward;
        }
    }
    let mut t = 0.0;
    while t < t_end {
        let cost = q.cost_rate();
        let (tau, _, reward) = q.next(&mut rng);
        // Spread the cost of [t, t + tau] over the batches it overlaps.
        let end = (t + tau).min(t_end);
        let mut a = t.max(start);
        while a < end {
            let k = batch_of(a);
            let b = (start + (k + 1) as f64 * width).min(end);
            totals[k] -= cost * (b - a);
            if b <= a {
                break;
            }
            a = b;
        }
        t += tau;
        if t >= start && t < t_end {
            totals[batch_of(t)] += reward;
        }
    }
    totals.into_iter().map(|s| s / width).collect()
}

fn check_model(model: &ModelParams) -> Result<()> {
    model.validate()
}

/// Estimates the discounted profit of `policy` from `cfg.initial_state`.
pub fn simulate_discounted(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    check_model(model)?;
    cfg.validate()?;
    let SimHorizon::DiscountedEffective { epsilon_tail } = cfg.horizon else {
        return Err(Error::InvalidSimConfig("discounted simulation needs an epsilon_tail horizon".into()));
    };
    let samples: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| discounted_replication(policy, model, cfg, epsilon_tail, k, None))
        .collect();
    Ok(estimate(&samples, cfg.replications))
}

/// Estimates the long-run average profit of `policy` by batch means.
///
/// A policy that admits everyone is rejected when the arrival rate is not
/// below the service rate it eventually uses.
pub fn simulate_average(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    check_model(model)?;
    cfg.validate()?;
    let SimHorizon::TimeAverage { t_end } = cfg.horizon else {
        return Err(Error::InvalidSimConfig("average simulation needs a time horizon T".into()));
    };
    if policy.admission.is_unbounded() {
        let mu = if policy.service.is_unbounded() { model.mu_low } else { model.mu_high };
        if model.lambda >= mu {
            return Err(Error::UnstablePolicy { lambda: model.lambda, mu });
        }
    }
    let batches: Vec<Vec<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| average_replication(policy, model, cfg, t_end, k))
        .collect();
    let pooled: Vec<f64> = batches.into_iter().flatten().collect();
    Ok(estimate(&pooled, cfg.replications))
}

/// Events of replication 0 of a discounted run.
pub fn trace_discounted(
    policy: &ThresholdPolicy,
    model: &ModelParams,
    cfg: &SimConfig,
) -> Result<Vec<TraceEvent>> {
    check_model(model)?;
    cfg.validate()?;
    let SimHorizon::DiscountedEffective { epsilon_tail } = cfg.horizon else {
        return Err(Error::InvalidSimConfig("trace needs an epsilon_tail horizon".into()));
    };
    let mut events = Vec::new();
    discounted_replication(policy, model, cfg, epsilon_tail, 0, Some(&mut events));
    Ok(events)
}

/// Writes `t,event,x,action_service,action_admit` rows.
pub fn write_trace<W: Write>(events: &[TraceEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "event", "x", "action_service", "action_admit"])?;
    for e in events {
        w.write_record([
            format!("{:.9}", e.t),
            e.event.as_str().to_string(),
            e.x.to_string(),
            if e.fast { "h" } else { "l" }.to_string(),
            u8::from(e.admit).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{quadratic_model, Variant};
    use crate::policy::evaluate_threshold_policy;

    fn model() -> ModelParams {
        quadratic_model(2.0, 3.0, 6.0, 8.0, 4.0, 1.0)
    }

    #[test]
    fn reject_all_is_worth_nothing() {
        let p = ThresholdPolicy::reject_all();
        let d = simulate_discounted(&p, &model(), &SimConfig::discounted(1, 50, 1e-6)).unwrap();
        assert_eq!((d.mean, d.half_width_95), (0.0, 0.0));
        let a = simulate_average(&p, &model(), &SimConfig::time_average(1, 5, 100.0)).unwrap();
        assert_eq!((a.mean, a.half_width_95), (0.0, 0.0));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = ThresholdPolicy::new(Threshold::Finite(2), Threshold::Finite(3));
        let cfg = SimConfig::discounted(42, 200, 1e-6).with_initial_state(1, 1);
        let a = simulate_discounted(&p, &model(), &cfg).unwrap();
        let b = simulate_discounted(&p, &model(), &cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.half_width_95.to_bits(), b.half_width_95.to_bits());
        let c = simulate_discounted(&p, &model(), &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn matches_exact_policy_value() {
        let m = model();
        let p = ThresholdPolicy::new(Threshold::Finite(2), Threshold::Finite(3));
        let exact = evaluate_threshold_policy(&p, &m, 40, Variant::Combined).unwrap();
        for (x, i) in [(0usize, 0u8), (2, 1), (4, 0)] {
            let cfg = SimConfig::discounted(7, 20_000, 1e-7).with_initial_state(x, i);
            let est = simulate_discounted(&p, &m, &cfg).unwrap();
            assert!(est.agrees_with(exact.value(x, i), 4.0), "({x},{i}): {est:?} vs {}", exact.value(x, i));
        }
    }

    #[test]
    fn unstable_admit_all_is_refused() {
        let m = quadratic_model(7.0, 3.0, 6.0, 8.0, 4.0, 1.0);
        let p = ThresholdPolicy::new(Threshold::Finite(3), Threshold::Unbounded);
        assert_eq!(
            simulate_average(&p, &m, &SimConfig::time_average(1, 2, 10.0)),
            Err(Error::UnstablePolicy { lambda: 7.0, mu: 6.0 })
        );
    }

    #[test]
    fn trace_is_consistent() {
        let p = ThresholdPolicy::new(Threshold::Finite(1), Threshold::Finite(2));
        let events = trace_discounted(&p, &model(), &SimConfig::discounted(3, 1, 1e-3)).unwrap();
        assert_eq!(events[0].event, EventKind::Start);
        for w in events.windows(2) {
            assert!(w[1].t >= w[0].t);
            assert!(w[1].x <= 3);
            if w[1].event == EventKind::Reject {
                assert_eq!(w[1].x, w[0].x);
            }
        }
        let mut buf = Vec::new();
        write_trace(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,event,x,action_service,action_admit\n0.000000000,start,0,l,1\n"));
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }
}
