//! Monte Carlo check of an exact policy value, plus a short event trace.

use flexq::dp::quadratic_model;
use flexq::sim::{simulate_average, simulate_discounted, trace_discounted, SimConfig};
use flexq::{evaluate_threshold_policy, Threshold, ThresholdPolicy, Variant};

fn main() -> flexq::Result<()> {
    let model = quadratic_model(2.0, 3.0, 6.0, 8.0, 4.0, 1.0);
    let policy = ThresholdPolicy::new(Threshold::Finite(3), Threshold::Finite(2));

    let exact = evaluate_threshold_policy(&policy, &model, 60, Variant::Combined)?.value(0, 1);
    let cfg = SimConfig::discounted(11, 20_000, 1e-8).with_initial_state(0, 1);
    let est = simulate_discounted(&policy, &model, &cfg)?;
    println!("discounted  exact {exact:.4}  simulated {:.4} +/- {:.4}", est.mean, est.half_width_95);

    let avg = simulate_average(&policy, &model, &SimConfig::time_average(12, 32, 2000.0))?;
    println!("average     simulated {:.4} +/- {:.4} per unit time", avg.mean, avg.half_width_95);

    let trace = trace_discounted(&policy, &model, &SimConfig::discounted(13, 1, 1e-3))?;
    println!("\nfirst events of one path:");
    flexq::sim::write_trace(&trace[..trace.len().min(8)], std::io::stdout())?;
    Ok(())
}
