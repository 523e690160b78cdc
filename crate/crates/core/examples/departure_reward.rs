//! The reward paid on departure instead of admission. The service threshold
//! shifts down by R on the burden scale, and admission is decided against 0.

use flexq::dp::quadratic_model;
use flexq::{solve_discounted, RewardTiming, SolveOptions, TruncationSpec, Variant};

fn main() -> flexq::Result<()> {
    println!("    R  admission-paid      departure-paid");
    for reward in [1.0, 3.0, 5.0, 8.0] {
        let base = quadratic_model(5.0, 3.0, 5.0, 6.0, reward, 0.5);
        let mut row = format!("{reward:5.1}");
        for timing in [RewardTiming::AtAdmission, RewardTiming::AtDeparture] {
            let m = base.with_timing(timing);
            let sol = solve_discounted(&m, &TruncationSpec::default(), Variant::Combined, &SolveOptions::default())?;
            row.push_str(&format!("  {:<18}", sol.policy.to_string()));
        }
        println!("{row}");
    }
    Ok(())
}
