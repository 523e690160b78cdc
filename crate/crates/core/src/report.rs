//! CSV artifacts and the canned studies behind `reproduce-paper`.
//!
//! Every CSV starts with `#`-prefixed metadata lines carrying the resolved
//! parameters, followed by a header row and comma-separated data.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dp::{quadratic_model, HorizonSpec, SolveOptions};
use crate::error::Result;
use crate::flexibility::{critical_reward, flexibility, sweep, FlexibilityOptions, SweepAxis, SweepRow};
use crate::model::{ModelParams, TruncationSpec};
use crate::threshold::Threshold;

/// Writes metadata comments, a header and the rows.
pub fn write_table<W: Write>(
    out: W,
    metadata: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = out;
    for line in metadata {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `key = value` lines describing a model.
pub fn model_metadata(m: &ModelParams) -> Vec<String> {
    vec![
        format!("lambda = {}", m.lambda),
        format!("mu_low = {}", m.mu_low),
        format!("mu_high = {}", m.mu_high),
        format!("c = {}", m.service_cost),
        format!("reward = {}", m.reward),
        format!("beta = {}", m.beta),
        format!("holding = {}", m.holding),
        format!("reward_timing = {}", m.reward_timing),
    ]
}

pub fn solver_metadata(trunc: &TruncationSpec, opts: &FlexibilityOptions) -> Vec<String> {
    let horizon = match opts.horizon {
        HorizonSpec::Infinite => "inf".to_string(),
        HorizonSpec::Steps(n) => n.to_string(),
    };
    vec![
        format!("solver.horizon = {horizon}"),
        format!("solver.tol = {:e}", opts.solve.tol),
        format!("solver.max_iters = {}", opts.solve.max_iters),
        format!("solver.max_x_max = {}", opts.solve.max_x_max),
        format!("truncation.x_max = {}", trunc.x_max),
        format!("truncation.safety_margin = {}", trunc.safety_margin),
    ]
}

pub fn fmt_real(v: f64) -> String {
    format!("{v:.6}")
}

/// Base instance of the reward and critical-reward studies.
pub fn figure_base() -> ModelParams {
    quadratic_model(5.0, 3.0, 5.0, 6.0, 0.0, 0.5)
}

/// `mu_low = 3, R = 4, c = 8, h = x^2, beta = 1`, `mu_high = 3 (1 + ratio)`.
pub fn table1_model(lambda: f64, ratio: f64) -> ModelParams {
    quadratic_model(lambda, 3.0, 3.0 * (1.0 + ratio), 8.0, 4.0, 1.0)
}

/// `delta / mu_low = 0.2, 0.4, ..., 2.0`.
pub fn table1_ratios() -> Vec<f64> {
    (1..=10).map(|k| f64::from(2 * k) / 10.0).collect()
}

/// The table's horizon: it is reproduced exactly by 100 transitions of the
/// finite-horizon recursion (the converged values differ at high traffic).
pub const TABLE1_STEPS: usize = 100;

/// One published row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub ratio: f64,
    pub bs: i64,
    pub bd: i64,
    pub bd_hat: i64,
    pub rel_flex: f64,
}

const fn row(ratio: f64, bs: i64, bd: i64, bd_hat: i64, rel_flex: f64) -> PublishedRow {
    PublishedRow { ratio, bs, bd, bd_hat, rel_flex }
}

pub const PUBLISHED_TABLE1_LAMBDA2: [PublishedRow; 10] = [
    row(0.2, 9, 2, 2, 0.0000),
    row(0.4, 5, 2, 2, 0.0000),
    row(0.6, 4, 2, 2, 0.0000),
    row(0.8, 3, 3, 2, 0.0028),
    row(1.0, 2, 3, 2, 0.0124),
    row(1.2, 2, 3, 2, 0.0231),
    row(1.4, 2, 4, 2, 0.0325),
    row(1.6, 2, 4, 2, 0.0406),
    row(1.8, 1, 4, 2, 0.0487),
    row(2.0, 1, 4, 2, 0.0598),
];

pub const PUBLISHED_TABLE1_LAMBDA20: [PublishedRow; 10] = [
    row(0.2, 9, 1, 1, 0.0000),
    row(0.4, 5, 1, 1, 0.0000),
    row(0.6, 3, 1, 1, 0.0000),
    row(0.8, 1, 2, 1, 0.0581),
    row(1.0, 0, 2, 1, 0.1940),
    row(1.2, 0, 2, 1, 0.3281),
    row(1.4, 0, 2, 1, 0.4584),
    row(1.6, 0, 2, 1, 0.5846),
    row(1.8, 0, 2, 1, 0.7067),
    row(2.0, 0, 2, 1, 0.8243),
];

pub fn published_table1(lambda: f64) -> Option<&'static [PublishedRow]> {
    if lambda == 2.0 {
        Some(&PUBLISHED_TABLE1_LAMBDA2)
    } else if lambda == 20.0 {
        Some(&PUBLISHED_TABLE1_LAMBDA20)
    } else {
        None
    }
}

/// Tolerance on the relative value of flexibility.
pub const TABLE1_REL_TOL: f64 = 0.002;

/// One computed row of the thresholds-versus-capacity table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub ratio: f64,
    pub bs: Threshold,
    pub bd: Threshold,
    pub bd_hat: Threshold,
    pub rel_flex: f64,
}

impl Table1Row {
    fn cells(&self) -> Vec<String> {
        vec![
            format!("{:.1}", self.ratio),
            self.bs.to_string(),
            self.bd.to_string(),
            self.bd_hat.to_string(),
            format!("{:.4}", self.rel_flex),
        ]
    }
}

pub fn table1_study(
    lambda: f64,
    horizon: HorizonSpec,
    trunc: &TruncationSpec,
    solve: &SolveOptions,
) -> Result<Vec<Table1Row>> {
    let opts = FlexibilityOptions { horizon, solve: *solve };
    table1_ratios()
        .into_iter()
        .map(|ratio| {
            let rep = flexibility(&table1_model(lambda, ratio), trunc, &opts)?;
            Ok(Table1Row {
                ratio,
                bs: rep.thresholds_combined.service,
                bd: rep.thresholds_combined.admission,
                bd_hat: rep.threshold_admission_only,
                rel_flex: rep.relative_at_origin,
            })
        })
        .collect()
}

/// A computed entry that differs from the published one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub lambda: f64,
    pub ratio: f64,
    pub column: &'static str,
    pub published: String,
    pub computed: String,
}

pub fn compare_table1(lambda: f64, rows: &[Table1Row], rel_tol: f64) -> Vec<Mismatch> {
    let Some(published) = published_table1(lambda) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (p, r) in published.iter().zip(rows) {
        let mut check = |column: &'static str, published: String, computed: String, ok: bool| {
            if !ok {
                out.push(Mismatch { lambda, ratio: p.ratio, column, published, computed });
            }
        };
        check("Bs", p.bs.to_string(), r.bs.to_string(), r.bs == Threshold::Finite(p.bs));
        check("Bd", p.bd.to_string(), r.bd.to_string(), r.bd == Threshold::Finite(p.bd));
        check("Bd_hat", p.bd_hat.to_string(), r.bd_hat.to_string(), r.bd_hat == Threshold::Finite(p.bd_hat));
        check(
            "rel_flex",
            format!("{:.4}", p.rel_flex),
            format!("{:.4}", r.rel_flex),
            (r.rel_flex - p.rel_flex).abs() <= rel_tol,
        );
    }
    out
}

pub fn write_table1<W: Write>(out: W, metadata: &[String], rows: &[Table1Row]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows.iter().map(Table1Row::cells).collect();
    write_table(out, metadata, &["delta_over_mul", "Bs", "Bd", "Bd_hat", "rel_flex"], &cells)
}

/// Sweep results as `<axis>,Bs,Bd,Bd_hat,rel_flex`. Failed rows and rows whose
/// `rel_flex` is an absolute difference are listed in the metadata.
pub fn write_sweep<W: Write>(
    out: W,
    metadata: &[String],
    axis: SweepAxis,
    rows: &[(f64, Result<SweepRow>)],
) -> Result<()> {
    let mut meta = metadata.to_vec();
    let mut cells = Vec::new();
    for (value, row) in rows {
        match row {
            Ok(r) => {
                if r.rel_flex_is_absolute {
                    meta.push(format!("{}={value}: rel_flex is the absolute epsilon(0,0)", axis.column()));
                }
                if !r.violations.is_empty() {
                    meta.push(format!(
                        "{}={value}: {} structural violations, first {}",
                        axis.column(),
                        r.violations.len(),
                        r.violations[0]
                    ));
                }
                cells.push(vec![
                    value.to_string(),
                    r.service.to_string(),
                    r.admission.to_string(),
                    r.admission_only.to_string(),
                    fmt_real(r.rel_flex),
                ]);
            }
            Err(e) => meta.push(format!("{}={value}: failed: {e}", axis.column())),
        }
    }
    write_table(out, &meta, &[axis.column(), "Bs", "Bd", "Bd_hat", "rel_flex"], &cells)
}

/// One point of the critical-reward curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure2Row {
    pub c: f64,
    pub c_over_delta: f64,
    pub r_tilde_low: f64,
    pub r_tilde_high: f64,
    pub single_crossing: bool,
}

/// Critical reward for each service cost in `costs`, on `base` with its reward ignored.
pub fn figure2_study(
    base: &ModelParams,
    costs: &[f64],
    resolution: f64,
    trunc: &TruncationSpec,
    opts: &FlexibilityOptions,
) -> Result<Vec<Figure2Row>> {
    costs
        .iter()
        .map(|&c| {
            let mut m = base.clone();
            m.service_cost = c;
            let ratio = m.cost_per_extra_rate();
            let cr = critical_reward(&m, 0.0, 2.0 * ratio + 4.0, resolution, trunc, opts)?;
            Ok(Figure2Row {
                c,
                c_over_delta: ratio,
                r_tilde_low: cr.r_tilde_low,
                r_tilde_high: cr.r_tilde_high,
                single_crossing: cr.single_crossing,
            })
        })
        .collect()
}

pub fn write_figure2<W: Write>(out: W, metadata: &[String], rows: &[Figure2Row]) -> Result<()> {
    let mut meta = metadata.to_vec();
    for r in rows.iter().filter(|r| !r.single_crossing) {
        meta.push(format!("c={}: verdict changed more than once; bracket is around the last valueless R", r.c));
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.c_over_delta.to_string(), fmt_real(r.r_tilde_low), fmt_real(r.r_tilde_high)])
        .collect();
    write_table(out, &meta, &["c_over_delta", "R_tilde_low", "R_tilde_high"], &cells)
}

/// Outcome of [`reproduce_published`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub mismatches: Vec<Mismatch>,
    /// Human-readable summary, also written to `summary.txt`.
    pub summary: String,
    pub files: Vec<String>,
}

/// Runs the three canned studies and writes their CSVs into `out_dir`:
///
/// * `figure1.csv`: reward sweep on the base instance
/// * `figure2.csv`: critical reward for `c = 1..=10`
/// * `table1_lambda{2,20}.csv`: the published table setup with 100 transitions
/// * `table1_converged_lambda{2,20}.csv`: the same at the infinite-horizon fixed point
/// * `summary.txt`: comparison with the published integers and ratios
pub fn reproduce_published(out_dir: &Path, trunc: &TruncationSpec, solve: &SolveOptions) -> Result<Reproduction> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        fs::write(out_dir.join(name), bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    let converged = FlexibilityOptions { horizon: HorizonSpec::Infinite, solve: *solve };

    let base = figure_base();
    let rewards: Vec<f64> = (1..=48).map(|k| f64::from(k) / 4.0).collect();
    let fig1 = sweep(&base, SweepAxis::Reward, &rewards, trunc, &converged);
    let mut meta = vec!["study = value of flexibility versus reward".to_string()];
    meta.extend(model_metadata(&base).into_iter().filter(|l| !l.starts_with("reward ")));
    meta.extend(solver_metadata(trunc, &converged));
    let mut buf = Vec::new();
    write_sweep(&mut buf, &meta, SweepAxis::Reward, &fig1)?;
    write("figure1.csv", buf)?;

    let costs: Vec<f64> = (1..=10).map(f64::from).collect();
    let fig2 = figure2_study(&base, &costs, 1e-3, trunc, &converged)?;
    let mut meta = vec!["study = critical reward versus c/delta".to_string(), "resolution = 0.001".to_string()];
    meta.extend(
        model_metadata(&base).into_iter().filter(|l| !l.starts_with("reward ") && !l.starts_with("c ")),
    );
    meta.extend(solver_metadata(trunc, &converged));
    let mut buf = Vec::new();
    write_figure2(&mut buf, &meta, &fig2)?;
    write("figure2.csv", buf)?;

    let mut summary = String::new();
    let mut mismatches = Vec::new();
    for lambda in [2.0, 20.0] {
        for (horizon, name) in [
            (HorizonSpec::Steps(TABLE1_STEPS), format!("table1_lambda{lambda}.csv")),
            (HorizonSpec::Infinite, format!("table1_converged_lambda{lambda}.csv")),
        ] {
            let rows = table1_study(lambda, horizon, trunc, solve)?;
            let opts = FlexibilityOptions { horizon, solve: *solve };
            let mut meta = vec!["study = thresholds and flexibility versus delta/mu_low".to_string()];
            meta.extend(
                model_metadata(&table1_model(lambda, 0.0))
                    .into_iter()
                    .filter(|l| !l.starts_with("mu_high ")),
            );
            meta.push("mu_high = mu_low * (1 + delta_over_mul)".to_string());
            meta.extend(solver_metadata(trunc, &opts));
            let mut buf = Vec::new();
            write_table1(&mut buf, &meta, &rows)?;
            write(&name, buf)?;
            let found = compare_table1(lambda, &rows, TABLE1_REL_TOL);
            let label = match horizon {
                HorizonSpec::Steps(n) => format!("{n} transitions"),
                HorizonSpec::Infinite => "converged".to_string(),
            };
            let worst = published_table1(lambda)
                .unwrap_or(&[])
                .iter()
                .zip(&rows)
                .map(|(p, r)| (r.rel_flex - p.rel_flex).abs())
                .fold(0.0, f64::max);
            let _ = writeln!(
                summary,
                "lambda = {lambda}, {label}: {} mismatches, largest rel_flex deviation {worst:.4}",
                found.len()
            );
            for m in &found {
                let _ = writeln!(
                    summary,
                    "  delta/mu_low = {}: {} published {} computed {}",
                    m.ratio, m.column, m.published, m.computed
                );
            }
            if horizon == HorizonSpec::Steps(TABLE1_STEPS) {
                mismatches.extend(found);
            }
        }
    }
    let verdict = if mismatches.is_empty() { "MATCH" } else { "MISMATCH" };
    let _ = writeln!(
        summary,
        "table 1 ({TABLE1_STEPS} transitions, rel_flex tolerance {TABLE1_REL_TOL}): {verdict}"
    );
    let below = fig2.iter().filter(|r| r.r_tilde_low < r.c_over_delta).count();
    let _ = writeln!(summary, "figure 2: R_tilde_low >= c/delta in {}/{} cases", fig2.len() - below, fig2.len());
    write("summary.txt", summary.clone().into_bytes())?;
    Ok(Reproduction { mismatches, summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_precedes_header() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["lambda = 2".into()], &["a", "b"], &[vec!["1".into(), "inf".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# lambda = 2\na,b\n1,inf\n");
    }

    #[test]
    fn ratios_print_cleanly() {
        let r: Vec<String> = table1_ratios().iter().map(|v| v.to_string()).collect();
        assert_eq!(r[3], "0.8");
        assert_eq!(r[9], "2");
    }

    #[test]
    fn published_row_format() {
        let rows = table1_study(2.0, HorizonSpec::Steps(TABLE1_STEPS), &TruncationSpec::default(), &SolveOptions::default())
            .unwrap();
        assert!(compare_table1(2.0, &rows, TABLE1_REL_TOL).is_empty());
        assert_eq!(rows[3].cells().join(","), "0.8,3,3,2,0.0028");
    }

    #[test]
    fn comparison_reports_differences() {
        let mut rows = table1_study(20.0, HorizonSpec::Steps(TABLE1_STEPS), &TruncationSpec::default(), &SolveOptions::default())
            .unwrap();
        rows[0].bs = Threshold::Finite(8);
        rows[1].rel_flex += 0.01;
        let found = compare_table1(20.0, &rows, TABLE1_REL_TOL);
        assert_eq!(found.len(), 2);
        assert_eq!((found[0].column, found[1].column), ("Bs", "rel_flex"));
    }
}
