//! Thresholds and relative flexibility across delta/mu_low for the two
//! published traffic levels, compared with the published values.

use flexq::dp::{HorizonSpec, SolveOptions};
use flexq::report::{compare_table1, published_table1, table1_study, TABLE1_REL_TOL, TABLE1_STEPS};
use flexq::TruncationSpec;

fn main() -> flexq::Result<()> {
    for lambda in [2.0, 20.0] {
        let rows = table1_study(
            lambda,
            HorizonSpec::Steps(TABLE1_STEPS),
            &TruncationSpec::default(),
            &SolveOptions::default(),
        )?;
        let published = published_table1(lambda).expect("published levels");
        println!("lambda = {lambda}");
        println!("  ratio  Bs  Bd  Bd_hat  rel_flex  published");
        for (r, p) in rows.iter().zip(published) {
            println!(
                "  {:5.1} {:>3} {:>3} {:>7}  {:8.4}  {:9.4}",
                r.ratio, r.bs.to_string(), r.bd.to_string(), r.bd_hat.to_string(), r.rel_flex, p.rel_flex
            );
        }
        let bad = compare_table1(lambda, &rows, TABLE1_REL_TOL);
        println!("  mismatches: {}\n", bad.len());
    }
    Ok(())
}
