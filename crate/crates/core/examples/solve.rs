//! Solve one discounted instance and print the optimal thresholds.

use flexq::{solve_discounted, HoldingCost, ModelParams, RewardTiming, SolveOptions, TruncationSpec, Variant};

fn main() -> flexq::Result<()> {
    let model = ModelParams {
        lambda: 5.0,
        mu_low: 3.0,
        mu_high: 5.0,
        service_cost: 6.0,
        reward: 8.0,
        beta: 0.5,
        holding: HoldingCost::quadratic(),
        reward_timing: RewardTiming::AtAdmission,
    };
    let sol = solve_discounted(&model, &TruncationSpec::default(), Variant::Combined, &SolveOptions::default())?;
    println!("policy   {}", sol.policy);
    println!("x_max    {}", sol.truncation.x_max);
    println!("v(0,0)   {:.6}", sol.values.value(0, 0));
    println!("v(0,1)   {:.6}", sol.values.value(0, 1));

    let burden = sol.values.burden();
    println!("\n x   burden   fast  admit");
    for x in 0..10 {
        println!(
            "{x:2}  {:8.4}  {:>4}  {:>5}",
            burden.departure_side[x],
            sol.policy.serves_fast(x),
            sol.policy.admits(x)
        );
    }
    Ok(())
}
