//! Optimal admission and two-speed service control for the M/M/1 queue.
//!
//! The crate solves the discounted and long-run average profit problems of
//! a single-server queue whose manager decides, at every event, whether to
//! admit an arriving customer (earning a fixed reward) and whether to run
//! the server at a low or a costly high rate. It extracts the optimal
//! threshold policies, measures how much the high-rate option is worth
//! against admission control alone, and cross-checks everything with exact
//! policy evaluation and a continuous-time simulator.
//!
//! The main entry points:
//!
//! * [`dp::solve_discounted`] / [`dp::solve`]: value iteration with adaptive truncation
//! * [`policy::evaluate_threshold_policy`]: exact value of any threshold rule
//! * [`flexibility::flexibility`]: value of service-rate flexibility
//! * [`flexibility::critical_reward`]: reward level where the fast server starts to matter
//! * [`average::average_reward`]: vanishing-discount average-reward solution
//! * [`sim::simulate_discounted`] / [`sim::simulate_average`]: Monte Carlo estimates
//! * [`cli::run`]: the command-line driver behind the `flexq` binary

pub mod average;
pub mod cli;
pub mod config;
pub mod dp;
pub mod error;
pub mod flexibility;
pub mod model;
pub mod policy;
pub mod report;
pub mod sim;
pub mod structure;
pub mod threshold;
pub mod tridiag;

pub use config::{Config, ConfigError};
pub use dp::{
    burden_of, extract_thresholds, finite_horizon, finite_horizon_iterate, near_ties, solve, solve_discounted,
    value_iteration, BurdenFunction, Horizon, HorizonSpec, Solution, SolveOptions, ValueFunction,
    Variant,
};
pub use error::{Error, Result};
pub use model::{
    uniformize, validate_assumption1, Assumption1Verdict, HoldingCost, ModelParams, RewardTiming,
    TruncationSpec, UniformizedModel,
};
pub use policy::{evaluate_threshold_policy, PolicyValue, StationaryPolicy};
pub use threshold::{threshold_t, Threshold, ThresholdPolicy};
