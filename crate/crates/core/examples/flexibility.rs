//! How much is the fast server worth? Compares the combined problem with
//! admission control alone over a range of rewards.

use flexq::dp::quadratic_model;
use flexq::flexibility::{flexibility, FlexibilityOptions};
use flexq::TruncationSpec;

fn main() -> flexq::Result<()> {
    let base = quadratic_model(5.0, 3.0, 5.0, 6.0, 0.0, 0.5);
    println!("c/delta = {}", base.cost_per_extra_rate());
    println!("    R  Bs   Bd  Bd_hat  eps(0,0)   rel_flex  verdict");
    for reward in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0] {
        let m = base.with_reward(reward);
        let r = flexibility(&m, &TruncationSpec::default(), &FlexibilityOptions::default())?;
        println!(
            "{reward:5.1} {:>3} {:>4} {:>7}  {:9.6}  {:9.6}  {}",
            r.thresholds_combined.service.to_string(),
            r.thresholds_combined.admission.to_string(),
            r.threshold_admission_only.to_string(),
            r.epsilon(0, 0),
            r.relative_at_origin,
            r.verdict
        );
    }
    Ok(())
}
