use std::path::Path;
use std::process::{Command, Output};

fn cropctl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cropctl"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Header and rows of a CSV file, every cell kept as text.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const TRAJECTORY_HEADER: &str =
    "t,S,R,E,u,lambda_S,lambda_R,lambda_E,lambda_hat_S,lambda_hat_R,lambda_hat_E,switch_raw,switch_clamped";

#[test]
fn simulate_without_diversion_leaves_energy_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = cropctl(
        &[
            "simulate", "--config", "baseline", "--u", "0", "--out", "t.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("objective = "));
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRAJECTORY_HEADER);
    let (header, rows) = read_csv(&dir.path().join("t.csv"));
    assert_eq!(rows.len(), 2001);
    assert!(column(&header, &rows, "E").iter().all(|&e| e == 0.0));
    // no solve, so no costates
    assert!(rows.iter().all(|r| r[5..].iter().all(String::is_empty)));
}

#[test]
fn simulate_first_step_follows_the_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let out = cropctl(&["simulate", "--u", "1", "--out", "t.csv"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("t.csv"));
    let t = column(&header, &rows, "t");
    let h = t[1] - t[0];
    for (name, slope) in [("S", -0.05), ("R", 0.4), ("E", 0.175)] {
        let x = column(&header, &rows, name);
        let estimate = (x[1] - x[0]) / h;
        assert!((estimate - slope).abs() < 1e-3, "{name}: {estimate}");
    }
}

#[test]
fn unknown_config_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[model]\nthetaa = 0.1\n").unwrap();
    let out = cropctl(
        &["simulate", "--config", "bad.toml", "--u", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("thetaa"));
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn inadmissible_control_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    for u in ["1.5", "-0.1"] {
        let out = cropctl(&["simulate", "--u", u], dir.path());
        assert_eq!(out.status.code(), Some(3), "u={u}");
    }
    std::fs::write(dir.path().join("short.csv"), "u\n0.5\n0.5\n").unwrap();
    let out = cropctl(&["simulate", "--control-csv", "short.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_both_reports_gap_and_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cropctl(
        &["solve", "--method", "both", "--out", "opt.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for needle in [
        "[direct]",
        "[fbsm]",
        "[comparison]",
        "objective_gap = ",
        "relative_gap = ",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let direct_regimes = text.lines().find(|l| l.starts_with("regimes = ")).unwrap();
    let kinds: Vec<&str> = direct_regimes
        .split('"')
        .filter(|s| ["upper", "interior", "lower"].contains(s))
        .collect();
    let mut want = ["upper", "interior", "lower", "upper"]
        .into_iter()
        .peekable();
    for k in &kinds {
        if want.peek() == Some(k) {
            want.next();
        }
    }
    assert!(want.peek().is_none(), "{kinds:?}");
    assert!(dir.path().join("opt.csv").exists());
    assert!(dir.path().join("opt.fbsm.csv").exists());
}

#[test]
fn switching_columns_clamp_only_for_plotting() {
    let dir = tempfile::tempdir().unwrap();
    let out = cropctl(&["solve", "--out", "opt.csv"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("opt.csv"));
    let raw = column(&header, &rows, "switch_raw");
    let clamped = column(&header, &rows, "switch_clamped");
    assert!(clamped.iter().all(|v| (-2.0..=2.0).contains(v)));
    assert!(raw.iter().any(|v| v.abs() > 2.0));
    for (r, c) in raw.iter().zip(&clamped) {
        assert_eq!(*c, r.clamp(-2.0, 2.0));
    }
    // discounted costates
    let t = column(&header, &rows, "t");
    let lam = column(&header, &rows, "lambda_S");
    let hat = column(&header, &rows, "lambda_hat_S");
    for k in 0..t.len() {
        assert!((hat[k] - (-0.02 * t[k]).exp() * lam[k]).abs() <= 1e-12 * lam[k].abs().max(1.0));
    }
}

#[test]
fn nonconvergence_exits_four_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[solver]\nmax_iters = 2\n").unwrap();
    let out = cropctl(
        &[
            "solve", "--config", "c.toml", "--method", "fbsm", "--out", "o.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("converged = false"));
    assert!(dir.path().join("o.csv").exists());
}

#[test]
fn trajectory_round_trips_through_its_control_column() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cropctl(&["solve", "--out", "opt.csv"], dir.path())
        .status
        .success());
    let out = cropctl(
        &["simulate", "--control-csv", "opt.csv", "--out", "again.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (h1, r1) = read_csv(&dir.path().join("opt.csv"));
    let (h2, r2) = read_csv(&dir.path().join("again.csv"));
    for name in ["S", "R", "E", "u"] {
        let (a, b) = (column(&h1, &r1, name), column(&h2, &r2, name));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn empty_config_is_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.toml"), "").unwrap();
    let a = cropctl(
        &[
            "simulate",
            "--config",
            "empty.toml",
            "--u",
            "0.3",
            "--out",
            "a.csv",
        ],
        dir.path(),
    );
    let b = cropctl(&["simulate", "--u", "0.3", "--out", "b.csv"], dir.path());
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn builtin_scenarios_write_four_trajectories_and_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = cropctl(
        &["scenarios", "--set", "builtin", "--out", "runs"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let runs = dir.path().join("runs");
    let mut files: Vec<_> = std::fs::read_dir(&runs)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        [
            "baseline.csv",
            "comparison.csv",
            "long-horizon.csv",
            "no-reinvest.csv",
            "short-horizon.csv"
        ]
    );
    let text = std::fs::read_to_string(runs.join("comparison.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scenario,J,switch_1,switch_2,switch_3,S_T,R_T,E_T,status"
    );
    let (header, rows) = read_csv(&runs.join("comparison.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        names,
        ["baseline", "no-reinvest", "short-horizon", "long-horizon"]
    );
    let j = column(&header, &rows, "J");
    assert!(j[0] > j[1]);
    assert!(rows.iter().all(|r| r[8] == "ok"));
}

#[test]
fn scenario_file_failures_are_tabulated() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("set.toml"),
        "[[scenario]]\nname = \"good\"\nmethod = \"direct\"\n[scenario.sim]\nN = 200\n\
         [[scenario]]\nname = \"bad\"\n[scenario.econ]\nc2 = -1.0\n",
    )
    .unwrap();
    let out = cropctl(
        &["scenarios", "--set", "set.toml", "--out", "runs"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, rows) = read_csv(&dir.path().join("runs/comparison.csv"));
    assert_eq!(rows[0][8], "ok");
    assert!(rows[1][8].starts_with("failed"));
    assert!(!dir.path().join("runs/bad.csv").exists());

    std::fs::write(
        dir.path().join("all_bad.toml"),
        "[[scenario]]\nname = \"bad\"\n[scenario.econ]\nc2 = -1.0\n",
    )
    .unwrap();
    let out = cropctl(
        &["scenarios", "--set", "all_bad.toml", "--out", "runs2"],
        dir.path(),
    );
    assert!(!out.status.success());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for tag in ["a", "b"] {
        let out = cropctl(
            &["solve", "--method", "both", "--out", &format!("{tag}.csv")],
            dir.path(),
        );
        assert!(out.status.success());
        std::fs::write(dir.path().join(format!("{tag}.txt")), &out.stdout).unwrap();
        let out = cropctl(&["scenarios", "--out", &format!("runs_{tag}")], dir.path());
        assert!(out.status.success());
    }
    let same = |a: &str, b: &str| {
        assert_eq!(
            std::fs::read(dir.path().join(a)).unwrap(),
            std::fs::read(dir.path().join(b)).unwrap(),
            "{a} vs {b}"
        );
    };
    same("a.csv", "b.csv");
    same("a.fbsm.csv", "b.fbsm.csv");
    same("a.txt", "b.txt");
    for f in [
        "baseline.csv",
        "no-reinvest.csv",
        "short-horizon.csv",
        "long-horizon.csv",
        "comparison.csv",
    ] {
        same(&format!("runs_a/{f}"), &format!("runs_b/{f}"));
    }
}
