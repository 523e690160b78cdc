//! Check the structural properties of a solution: monotone values, monotone
//! burden, nonnegative and increasing flexibility, and agreement between the
//! threshold policy and the greedy actions.

use flexq::dp::quadratic_model;
use flexq::flexibility::{flexibility, FlexibilityOptions};
use flexq::structure::check_solution;
use flexq::TruncationSpec;

fn main() -> flexq::Result<()> {
    for (lambda, reward) in [(2.0, 4.0), (5.0, 1.0), (20.0, 12.0)] {
        let model = quadratic_model(lambda, 3.0, 6.0, 8.0, reward, 1.0);
        let report = flexibility(&model, &TruncationSpec::default(), &FlexibilityOptions::default())?;
        let own = check_solution(&report.combined, &model, 1e-9);
        let pair = report.violations(&model);
        println!(
            "lambda={lambda:<4} R={reward:<4} {}  solution violations: {}  pair violations: {}",
            report.thresholds_combined,
            own.len(),
            pair.len()
        );
        for v in own.iter().chain(&pair).take(3) {
            println!("    {v:?}");
        }
    }
    Ok(())
}
