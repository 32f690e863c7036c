//! CSV emission and the plain-text run summary.

use std::fmt::Write as _;
use std::path::Path;

use cropctl::scenarios::ComparisonRow;
use cropctl::{ModelParams, SolveReport, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "t",
    "S",
    "R",
    "E",
    "u",
    "lambda_S",
    "lambda_R",
    "lambda_E",
    "lambda_hat_S",
    "lambda_hat_R",
    "lambda_hat_E",
    "switch_raw",
    "switch_clamped",
];

pub const COMPARISON_HEADER: [&str; 9] = [
    "scenario", "J", "switch_1", "switch_2", "switch_3", "S_T", "R_T", "E_T", "status",
];

/// Plotting range of the switching series.
pub const SWITCH_CLAMP: f64 = 2.0;

/// Shortest decimal string that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One row per grid node. The control column repeats the last interval's
/// value at the terminal node; costate and switching columns are empty when
/// the trajectory carries none.
pub fn write_trajectory(path: &Path, traj: &Trajectory, p: &ModelParams) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write `{}`: {e}", path.display()))?;
    let io = |e: csv::Error| format!("cannot write `{}`: {e}", path.display());
    w.write_record(TRAJECTORY_HEADER).map_err(io)?;
    let discounted = traj.discounted_adjoints(p);
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![
            num(traj.grid.node(k)),
            num(x.s),
            num(x.r),
            num(x.e),
            num(traj.controls.at_node(k)),
        ];
        match (&traj.adjoints, &discounted) {
            (Some(lam), Some(hat)) => {
                row.extend([lam[k].lam_s, lam[k].lam_r, lam[k].lam_e].map(num));
                row.extend([hat[k].lam_s, hat[k].lam_r, hat[k].lam_e].map(num));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        match &traj.switching {
            Some(sw) => {
                row.push(num(sw[k]));
                row.push(num(sw[k].clamp(-SWITCH_CLAMP, SWITCH_CLAMP)));
            }
            None => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| format!("cannot write `{}`: {e}", path.display()))
}

/// Reads the `u` column of a CSV file. A trajectory file has one more row
/// than there are intervals; the trailing terminal-node row is dropped when
/// `n_intervals + 1` rows are present.
pub fn read_control_column(path: &Path, n_intervals: usize) -> Result<Vec<f64>, String> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| format!("cannot read `{}`: {e}", path.display()))?;
    let headers = r
        .headers()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "u")
        .ok_or_else(|| format!("{}: no `u` column in header", path.display()))?;
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let field = rec.get(col).unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| {
            format!(
                "{}: row {}: `{field}` is not a number",
                path.display(),
                line + 2
            )
        })?;
        values.push(v);
    }
    if values.len() == n_intervals + 1 {
        values.pop();
    }
    if values.len() != n_intervals {
        return Err(format!(
            "{}: expected {n_intervals} control values (or {} trajectory rows), found {}",
            path.display(),
            n_intervals + 1,
            values.len()
        ));
    }
    Ok(values)
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write `{}`: {e}", path.display()))?;
    let io = |e: csv::Error| format!("cannot write `{}`: {e}", path.display());
    w.write_record(COMPARISON_HEADER).map_err(io)?;
    for row in rows {
        let terminal = row.terminal.map(|x| [x.s, x.r, x.e]);
        let mut rec = vec![row.scenario.clone(), opt(row.objective)];
        rec.extend(row.switches.map(opt));
        rec.extend((0..3).map(|i| opt(terminal.map(|t| t[i]))));
        rec.push(row.status.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| format!("cannot write `{}`: {e}", path.display()))
}

/// Summary block for one solve. Wall time is left out so repeated runs
/// print identical text.
pub fn summary_block(section: &str, report: &SolveReport, traj: &Trajectory) -> String {
    let mut s = String::new();
    let x = traj.terminal_state();
    let _ = writeln!(s, "[{section}]");
    let _ = writeln!(s, "objective = {}", num(report.objective));
    let _ = writeln!(s, "iterations = {}", report.iterations);
    let _ = writeln!(s, "converged = {}", report.converged);
    let _ = writeln!(s, "termination = \"{:?}\"", report.termination);
    let _ = writeln!(s, "final_delta = {}", num(report.final_control_delta));
    let kinds: Vec<String> = report
        .regimes
        .iter()
        .map(|r| format!("\"{}\"", r.kind))
        .collect();
    let _ = writeln!(s, "regimes = [{}]", kinds.join(", "));
    let bounds: Vec<String> = report
        .regimes
        .iter()
        .map(|r| format!("[{}, {}, {:.6}]", num(r.start), num(r.end), r.level))
        .collect();
    let _ = writeln!(s, "regime_spans = [{}]", bounds.join(", "));
    let switches: Vec<String> = cropctl::regimes::switch_times(&report.regimes)
        .into_iter()
        .map(num)
        .collect();
    let _ = writeln!(s, "switch_times = [{}]", switches.join(", "));
    let _ = writeln!(s, "terminal = [{}, {}, {}]", num(x.s), num(x.r), num(x.e));
    s
}
