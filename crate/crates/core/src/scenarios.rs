//! Reference experiments, parameter sweeps and cross-solver comparison.

use std::collections::HashSet;

use crate::direct::{solve_direct, DirectConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fbsm::{solve_fbsm, SweepConfig};
use crate::integrate::{InitialGuess, Trajectory};
use crate::model::{ModelParams, State};
use crate::pmp::AdjointMode;
use crate::regimes::{switch_times, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    Fbsm,
    Direct,
    #[default]
    Both,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Fbsm => "fbsm",
            SolverChoice::Direct => "direct",
            SolverChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub solver: SolverChoice,
    pub adjoint_mode: AdjointMode,
}

impl Scenario {
    pub fn new(name: impl Into<String>, params: ModelParams) -> Self {
        Self {
            name: name.into(),
            params,
            solver: SolverChoice::default(),
            adjoint_mode: AdjointMode::default(),
        }
    }
}

/// Solver templates shared by every scenario of a run. The adjoint mode of
/// each scenario overrides the templates' modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSettings {
    pub sweep: SweepConfig,
    pub direct: DirectConfig,
}

/// Baseline, no reinvestment, short horizon and long horizon, in that order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let base = ModelParams::baseline();
    vec![
        Scenario::new("baseline", base.clone()),
        Scenario::new(
            "no-reinvest",
            ModelParams {
                theta: 0.0,
                ..base.clone()
            },
        ),
        Scenario::new(
            "short-horizon",
            ModelParams {
                horizon: 15.0,
                ..base.clone()
            },
        ),
        Scenario::new(
            "long-horizon",
            ModelParams {
                horizon: 30.0,
                ..base
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub trajectory: Trajectory,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub fbsm: Option<SolverRun>,
    pub direct: Option<SolverRun>,
}

impl ScenarioResult {
    /// The direct run when present, otherwise the sweep run.
    pub fn primary(&self) -> &SolverRun {
        self.direct
            .as_ref()
            .or(self.fbsm.as_ref())
            .expect("at least one solver ran")
    }

    pub fn converged(&self) -> bool {
        self.fbsm
            .iter()
            .chain(self.direct.iter())
            .all(|r| r.report.converged)
    }

    /// `(|J_fbsm − J_direct|, |J_fbsm − J_direct| / |J_direct|)` when both ran.
    pub fn objective_gap(&self) -> Option<(f64, f64)> {
        let (f, d) = (self.fbsm.as_ref()?, self.direct.as_ref()?);
        let abs = (f.report.objective - d.report.objective).abs();
        Some((abs, abs / d.report.objective.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEntry {
    pub name: String,
    /// Value of the swept parameter, for sweep reports.
    pub swept_value: Option<f64>,
    pub outcome: std::result::Result<ScenarioResult, String>,
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub objective: Option<f64>,
    pub switches: [Option<f64>; 3],
    pub terminal: Option<State>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub entries: Vec<ScenarioEntry>,
}

impl ComparisonReport {
    pub fn results(&self) -> impl Iterator<Item = (&ScenarioEntry, &ScenarioResult)> {
        self.entries
            .iter()
            .filter_map(|e| e.outcome.as_ref().ok().map(|r| (e, r)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (&ScenarioEntry, &String)> {
        self.entries
            .iter()
            .filter_map(|e| e.outcome.as_ref().err().map(|m| (e, m)))
    }

    pub fn get(&self, name: &str) -> Option<&ScenarioResult> {
        self.entries
            .iter()
            .find(|e| e.name == name)?
            .outcome
            .as_ref()
            .ok()
    }

    pub fn rows(&self) -> Vec<ComparisonRow> {
        self.entries
            .iter()
            .map(|e| match &e.outcome {
                Ok(res) => {
                    let run = res.primary();
                    let times = switch_times(&run.report.regimes);
                    let mut switches = [None; 3];
                    for (slot, t) in switches.iter_mut().zip(times) {
                        *slot = Some(t);
                    }
                    ComparisonRow {
                        scenario: e.name.clone(),
                        objective: Some(run.report.objective),
                        switches,
                        terminal: Some(run.trajectory.terminal_state()),
                        status: if res.converged() {
                            "ok".into()
                        } else {
                            "nonconverged".into()
                        },
                    }
                }
                Err(msg) => ComparisonRow {
                    scenario: e.name.clone(),
                    objective: None,
                    switches: [None; 3],
                    terminal: None,
                    status: format!("failed: {msg}"),
                },
            })
            .collect()
    }
}

fn solve_scenario(scenario: &Scenario, settings: &SolverSettings) -> Result<ScenarioResult> {
    scenario.params.validate()?;
    let fbsm = match scenario.solver {
        SolverChoice::Fbsm | SolverChoice::Both => {
            let cfg = SweepConfig {
                adjoint_mode: scenario.adjoint_mode,
                ..settings.sweep.clone()
            };
            let (trajectory, report) = solve_fbsm(&scenario.params, &cfg)?;
            Some(SolverRun { trajectory, report })
        }
        SolverChoice::Direct => None,
    };
    let direct = match scenario.solver {
        SolverChoice::Direct | SolverChoice::Both => {
            let cfg = DirectConfig {
                report_adjoint_mode: scenario.adjoint_mode,
                ..settings.direct.clone()
            };
            let (trajectory, report) = solve_direct(&scenario.params, &cfg)?;
            Some(SolverRun { trajectory, report })
        }
        SolverChoice::Fbsm => None,
    };
    Ok(ScenarioResult { fbsm, direct })
}

fn check_unique_names(list: &[Scenario]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in list {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate scenario name `{}`",
                s.name
            )));
        }
    }
    Ok(())
}

/// Solves every scenario; failures are recorded per entry and do not stop
/// the run. Entries keep the input order whatever the execution strategy.
pub fn run_scenarios(
    list: &[Scenario],
    settings: &SolverSettings,
    exec: Execution,
) -> Result<ComparisonReport> {
    check_unique_names(list)?;
    let entries = exec::map_indexed(exec, list.len(), |i| {
        let scenario = &list[i];
        ScenarioEntry {
            name: scenario.name.clone(),
            swept_value: None,
            outcome: solve_scenario(scenario, settings).map_err(|e| e.to_string()),
        }
    });
    Ok(ComparisonReport { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Theta,
    Horizon,
    PriceEnergy,
    C1,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Theta => "theta",
            SweepParameter::Horizon => "T",
            SweepParameter::PriceEnergy => "p_E",
            SweepParameter::C1 => "c1",
        }
    }

    pub fn apply(self, params: &mut ModelParams, value: f64) {
        match self {
            SweepParameter::Theta => params.theta = value,
            SweepParameter::Horizon => params.horizon = value,
            SweepParameter::PriceEnergy => params.p_e = value,
            SweepParameter::C1 => params.c1 = value,
        }
    }
}

/// One solve per value of `parameter`, in the given order.
///
/// Each successful point warm-starts the next from its control, so points
/// are solved sequentially regardless of how the caller schedules other
/// work.
pub fn sweep(
    parameter: SweepParameter,
    values: &[f64],
    base: &Scenario,
    settings: &SolverSettings,
) -> Result<ComparisonReport> {
    let mut settings = settings.clone();
    let mut entries = Vec::with_capacity(values.len());
    for &value in values {
        let mut scenario = base.clone();
        scenario.name = format!("{}[{}={}]", base.name, parameter.name(), value);
        if !value.is_finite() {
            entries.push(ScenarioEntry {
                name: scenario.name,
                swept_value: Some(value),
                outcome: Err(format!("non-finite sweep value {value}")),
            });
            continue;
        }
        parameter.apply(&mut scenario.params, value);
        let outcome = solve_scenario(&scenario, &settings).map_err(|e| e.to_string());
        if let Ok(res) = &outcome {
            let warm = InitialGuess::Path(res.primary().trajectory.controls.clone());
            settings.sweep.initial_guess = warm.clone();
            settings.direct.initial_guess = warm;
        }
        entries.push(ScenarioEntry {
            name: scenario.name,
            swept_value: Some(value),
            outcome,
        });
    }
    Ok(ComparisonReport { entries })
}
