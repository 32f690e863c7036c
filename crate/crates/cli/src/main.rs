//! `cropctl`: simulate, solve and compare residue-allocation scenarios.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 bad input or inadmissible
//! control, 4 solver did not converge (outputs are still written).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cropctl::direct::solve_direct;
use cropctl::fbsm::solve_fbsm;
use cropctl::integrate::{integrate_forward, ControlPath, Scheme};
use cropctl::scenarios::{builtin_scenarios, run_scenarios, Scenario, SolverSettings};
use cropctl::{model, Execution};

use config::{load_config, parse_scenarios, Method, ModeArg};

const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NONCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cropctl",
    version,
    about = "Optimal residue allocation between soil and energy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the states under a given control and report its objective.
    Simulate(SimulateArgs),
    /// Solve the control problem and write the optimal trajectory.
    Solve(SolveArgs),
    /// Run a set of scenarios and write one trajectory each plus a comparison table.
    Scenarios(ScenarioArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("control").required(true).args(["u", "control_csv"])))]
struct SimulateArgs {
    /// Config file, or `baseline` for the built-in parameters.
    #[arg(long, default_value = config::BASELINE)]
    config: String,
    /// Constant diversion fraction on every interval.
    #[arg(long, allow_hyphen_values = true)]
    u: Option<f64>,
    /// CSV with a `u` column (a trajectory file works).
    #[arg(long)]
    control_csv: Option<PathBuf>,
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = config::BASELINE)]
    config: String,
    /// Overrides `solver.method` from the config.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Overrides `solver.adjoint_mode` from the config.
    #[arg(long, value_enum)]
    adjoint_mode: Option<ModeArg>,
    /// Trajectory CSV; with `--method both` the sweep result goes to `<stem>.fbsm.csv`.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// `builtin` or a scenario file.
    #[arg(long, default_value = "builtin")]
    set: String,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Solve scenarios one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Solve(args) => solve(args),
        Command::Scenarios(args) => scenarios(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let cfg = load_config(&args.config).map_err(Failure::config)?;
    let p = &cfg.params;
    let values = match (args.u, &args.control_csv) {
        (Some(u), _) => vec![u; p.n_steps],
        (None, Some(path)) => {
            output::read_control_column(path, p.n_steps).map_err(Failure::input)?
        }
        (None, None) => unreachable!("clap enforces one control source"),
    };
    let controls = ControlPath::new(values).map_err(|e| Failure::input(e.to_string()))?;
    let traj = integrate_forward(&controls, p, Scheme::CrankNicolson)
        .map_err(|e| Failure::input(e.to_string()))?;
    let j = model::objective(&traj, p).map_err(|e| Failure::input(e.to_string()))?;
    output::write_trajectory(&args.out, &traj, p).map_err(Failure::input)?;
    println!("objective = {j}");
    Ok(0)
}

fn fbsm_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    out.with_file_name(format!("{stem}.fbsm.csv"))
}

fn solve(args: SolveArgs) -> Result<u8, Failure> {
    let mut cfg = load_config(&args.config).map_err(Failure::config)?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(mode) = args.adjoint_mode {
        cfg.adjoint_mode = mode.into();
        cfg.settings.sweep.adjoint_mode = cfg.adjoint_mode;
        cfg.settings.direct.report_adjoint_mode = cfg.adjoint_mode;
    }
    let p = &cfg.params;
    let solver_err = |e: cropctl::Error| Failure::input(e.to_string());
    let mut all_converged = true;
    let mut objectives = (None, None);
    if matches!(cfg.method, Method::Direct | Method::Both) {
        let (traj, report) = solve_direct(p, &cfg.settings.direct).map_err(solver_err)?;
        output::write_trajectory(&args.out, &traj, p).map_err(Failure::input)?;
        print!("{}", output::summary_block("direct", &report, &traj));
        all_converged &= report.converged;
        objectives.1 = Some(report.objective);
    }
    if matches!(cfg.method, Method::Fbsm | Method::Both) {
        let (traj, report) = solve_fbsm(p, &cfg.settings.sweep).map_err(solver_err)?;
        let path = if cfg.method == Method::Both {
            fbsm_path(&args.out)
        } else {
            args.out.clone()
        };
        output::write_trajectory(&path, &traj, p).map_err(Failure::input)?;
        print!("{}", output::summary_block("fbsm", &report, &traj));
        all_converged &= report.converged;
        objectives.0 = Some(report.objective);
    }
    if let (Some(jf), Some(jd)) = objectives {
        let gap = (jf - jd).abs();
        println!("[comparison]");
        println!("objective_gap = {gap}");
        println!("relative_gap = {}", gap / jd.abs());
    }
    if all_converged {
        Ok(0)
    } else {
        log::warn!("solver stopped before meeting its tolerance");
        Ok(EXIT_NONCONVERGED)
    }
}

fn load_scenario_set(set: &str) -> Result<(Vec<Scenario>, SolverSettings), Failure> {
    if set == "builtin" && !Path::new(set).exists() {
        return Ok((builtin_scenarios(), SolverSettings::default()));
    }
    let text = std::fs::read_to_string(set)
        .map_err(|e| Failure::config(format!("cannot read `{set}`: {e}")))?;
    let (list, settings) = parse_scenarios(&text, set).map_err(Failure::config)?;
    for s in &list {
        if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name == "comparison" {
            return Err(Failure::config(format!(
                "{set}: `{}` is not usable as a scenario name",
                s.name
            )));
        }
    }
    Ok((list, settings))
}

fn scenarios(args: ScenarioArgs) -> Result<u8, Failure> {
    let (list, settings) = load_scenario_set(&args.set)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::input(format!("cannot create `{}`: {e}", args.out.display())))?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report =
        run_scenarios(&list, &settings, exec).map_err(|e| Failure::config(e.to_string()))?;
    for (scenario, entry) in list.iter().zip(&report.entries) {
        match &entry.outcome {
            Ok(res) => {
                let path = args.out.join(format!("{}.csv", entry.name));
                output::write_trajectory(&path, &res.primary().trajectory, &scenario.params)
                    .map_err(Failure::input)?;
            }
            Err(msg) => log::warn!("scenario `{}` failed: {msg}", entry.name),
        }
    }
    let rows = report.rows();
    output::write_comparison(&args.out.join("comparison.csv"), &rows).map_err(Failure::input)?;
    for row in &rows {
        println!(
            "{} J={} status={}",
            row.scenario,
            row.objective.map(|j| j.to_string()).unwrap_or_default(),
            row.status
        );
    }
    if report.failures().count() == report.entries.len() {
        return Err(Failure::config("every scenario failed"));
    }
    Ok(0)
}
