//! Locate the reward level above which the fast server starts being used,
//! for several service-cost levels.

use flexq::dp::quadratic_model;
use flexq::flexibility::{critical_reward, FlexibilityOptions};
use flexq::TruncationSpec;

fn main() -> flexq::Result<()> {
    println!(" c  c/delta  R_tilde_low  R_tilde_high  bisected");
    for c in [1.0, 2.0, 4.0, 8.0] {
        let m = quadratic_model(5.0, 3.0, 5.0, c, 0.0, 0.5);
        let ratio = m.cost_per_extra_rate();
        let cr = critical_reward(
            &m,
            0.0,
            2.0 * ratio + 4.0,
            1e-3,
            &TruncationSpec::default(),
            &FlexibilityOptions::default(),
        )?;
        println!(
            "{c:2}  {ratio:7.3}  {:11.4}  {:12.4}  {}",
            cr.r_tilde_low, cr.r_tilde_high, cr.single_crossing
        );
    }
    Ok(())
}
