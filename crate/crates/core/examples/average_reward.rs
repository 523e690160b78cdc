//! Long-run average profit by letting the discount rate vanish.

use flexq::average::{average_reward, AverageOptions};
use flexq::dp::quadratic_model;
use flexq::TruncationSpec;

fn main() -> flexq::Result<()> {
    let model = quadratic_model(5.0, 3.0, 5.0, 6.0, 8.0, 0.5);
    let res = average_reward(&model, &TruncationSpec::default(), &AverageOptions::default())?;
    println!("      beta          g       spread  thresholds");
    for n in 0..res.beta_sequence.len() {
        println!(
            "{:10.3e}  {:9.6}  {:11.3e}  {}",
            res.beta_sequence[n], res.g_trace[n], res.spread_trace[n], res.threshold_trace[n]
        );
    }
    println!("\ng* = {:.6} under {}", res.g_star, res.policy);
    println!(
        "certificate: inequality violation {:.1e}, greedy gap {:.1e}",
        res.certificate.inequality_violation, res.certificate.greedy_gap
    );
    Ok(())
}
