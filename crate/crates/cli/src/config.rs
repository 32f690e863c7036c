//! Run configuration files.
//!
//! TOML with four optional sections:
//!
//! ```toml
//! [model]   # alpha, delta_S, rho, gamma, beta, delta_E, theta
//! [econ]    # p_E, p_S, c1, c2, discount
//! [sim]     # T, N, S0, R0, E0
//! [solver]  # method, adjoint_mode, tol, max_iters, relaxation
//! ```
//!
//! Unknown keys are rejected; missing keys take baseline values.

use std::path::Path;

use cropctl::direct::DirectConfig;
use cropctl::fbsm::SweepConfig;
use cropctl::scenarios::{Scenario, SolverChoice, SolverSettings};
use cropctl::{AdjointMode, ModelParams};
use serde::Deserialize;

/// `--config` value that selects the built-in baseline without a file.
pub const BASELINE: &str = "baseline";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    alpha: Option<f64>,
    #[serde(rename = "delta_S")]
    delta_s: Option<f64>,
    rho: Option<f64>,
    gamma: Option<f64>,
    beta: Option<f64>,
    #[serde(rename = "delta_E")]
    delta_e: Option<f64>,
    theta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EconSection {
    #[serde(rename = "p_E")]
    p_e: Option<f64>,
    #[serde(rename = "p_S")]
    p_s: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    discount: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(rename = "T")]
    horizon: Option<f64>,
    #[serde(rename = "N")]
    n_steps: Option<usize>,
    #[serde(rename = "S0")]
    s0: Option<f64>,
    #[serde(rename = "R0")]
    r0: Option<f64>,
    #[serde(rename = "E0")]
    e0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fbsm,
    Direct,
    Both,
}

impl From<Method> for SolverChoice {
    fn from(m: Method) -> Self {
        match m {
            Method::Fbsm => SolverChoice::Fbsm,
            Method::Direct => SolverChoice::Direct,
            Method::Both => SolverChoice::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Paper,
    Corrected,
}

impl From<ModeArg> for AdjointMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => AdjointMode::PaperEq9,
            ModeArg::Corrected => AdjointMode::CorrectedFromHamiltonian,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    method: Option<Method>,
    adjoint_mode: Option<ModeArg>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    relaxation: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<ModelSection>,
    econ: Option<EconSection>,
    sim: Option<SimSection>,
    solver: Option<SolverSection>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub method: Method,
    pub adjoint_mode: AdjointMode,
    pub settings: SolverSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::baseline(),
            method: Method::Direct,
            adjoint_mode: AdjointMode::CorrectedFromHamiltonian,
            settings: SolverSettings::default(),
        }
    }
}

/// Fills `target` from `value`, or records `key` as defaulted.
fn take<T>(target: &mut T, value: Option<T>, key: &'static str, defaulted: &mut Vec<&'static str>) {
    match value {
        Some(v) => *target = v,
        None => defaulted.push(key),
    }
}

fn apply_params(
    params: &mut ModelParams,
    model: ModelSection,
    econ: EconSection,
    sim: SimSection,
    defaulted: &mut Vec<&'static str>,
) {
    take(&mut params.alpha, model.alpha, "model.alpha", defaulted);
    take(
        &mut params.delta_s,
        model.delta_s,
        "model.delta_S",
        defaulted,
    );
    take(&mut params.rho, model.rho, "model.rho", defaulted);
    take(&mut params.gamma, model.gamma, "model.gamma", defaulted);
    take(&mut params.beta, model.beta, "model.beta", defaulted);
    take(
        &mut params.delta_e,
        model.delta_e,
        "model.delta_E",
        defaulted,
    );
    take(&mut params.theta, model.theta, "model.theta", defaulted);
    take(&mut params.p_e, econ.p_e, "econ.p_E", defaulted);
    take(&mut params.p_s, econ.p_s, "econ.p_S", defaulted);
    take(&mut params.c1, econ.c1, "econ.c1", defaulted);
    take(&mut params.c2, econ.c2, "econ.c2", defaulted);
    take(
        &mut params.discount,
        econ.discount,
        "econ.discount",
        defaulted,
    );
    take(&mut params.horizon, sim.horizon, "sim.T", defaulted);
    take(&mut params.n_steps, sim.n_steps, "sim.N", defaulted);
    take(&mut params.s0, sim.s0, "sim.S0", defaulted);
    take(&mut params.r0, sim.r0, "sim.R0", defaulted);
    take(&mut params.e0, sim.e0, "sim.E0", defaulted);
}

fn apply_solver(cfg: &mut RunConfig, solver: SolverSection, defaulted: &mut Vec<&'static str>) {
    take(&mut cfg.method, solver.method, "solver.method", defaulted);
    let mut mode = ModeArg::Corrected;
    take(
        &mut mode,
        solver.adjoint_mode,
        "solver.adjoint_mode",
        defaulted,
    );
    cfg.adjoint_mode = mode.into();
    let sweep: &mut SweepConfig = &mut cfg.settings.sweep;
    let direct: &mut DirectConfig = &mut cfg.settings.direct;
    match solver.tol {
        Some(tol) => {
            sweep.tol_control = tol;
            direct.tol_grad = tol;
        }
        None => defaulted.push("solver.tol"),
    }
    match solver.max_iters {
        Some(n) => {
            sweep.max_iters = n;
            direct.max_iters = n;
        }
        None => defaulted.push("solver.max_iters"),
    }
    take(
        &mut sweep.relaxation,
        solver.relaxation,
        "solver.relaxation",
        defaulted,
    );
    sweep.adjoint_mode = cfg.adjoint_mode;
    direct.report_adjoint_mode = cfg.adjoint_mode;
}

fn notice_defaults(source: &str, defaulted: &[&str]) {
    if !defaulted.is_empty() {
        log::info!(
            "{source}: {} key(s) not set, using baseline defaults: {}",
            defaulted.len(),
            defaulted.join(", ")
        );
    }
}

fn validate(cfg: &RunConfig) -> Result<(), String> {
    cfg.params.validate().map_err(|e| e.to_string())?;
    cfg.settings.sweep.validate().map_err(|e| e.to_string())?;
    cfg.settings.direct.validate().map_err(|e| e.to_string())
}

/// Parses configuration text; errors carry the TOML line/key diagnostics.
pub fn parse_config(text: &str, source: &str) -> Result<RunConfig, String> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| format!("{source}: {e}"))?;
    let mut cfg = RunConfig::default();
    let mut defaulted = Vec::new();
    apply_params(
        &mut cfg.params,
        raw.model.unwrap_or_default(),
        raw.econ.unwrap_or_default(),
        raw.sim.unwrap_or_default(),
        &mut defaulted,
    );
    apply_solver(&mut cfg, raw.solver.unwrap_or_default(), &mut defaulted);
    notice_defaults(source, &defaulted);
    validate(&cfg).map_err(|e| format!("{source}: {e}"))?;
    Ok(cfg)
}

/// Loads `path`, or the baseline when `path` is the literal `baseline` and
/// no such file exists.
pub fn load_config(path: &str) -> Result<RunConfig, String> {
    if path == BASELINE && !Path::new(path).exists() {
        return Ok(RunConfig::default());
    }
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    parse_config(&text, path)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    name: String,
    method: Option<Method>,
    adjoint_mode: Option<ModeArg>,
    model: Option<ModelSection>,
    econ: Option<EconSection>,
    sim: Option<SimSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    solver: Option<SolverSection>,
    #[serde(default)]
    scenario: Vec<ScenarioSpec>,
}

/// Scenario set file: an optional shared `[solver]` section and one
/// `[[scenario]]` table per run, each with `name`, optional `method` and
/// `adjoint_mode`, and optional `model`/`econ`/`sim` overrides of the
/// baseline.
pub fn parse_scenarios(
    text: &str,
    source: &str,
) -> Result<(Vec<Scenario>, SolverSettings), String> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| format!("{source}: {e}"))?;
    if raw.scenario.is_empty() {
        return Err(format!("{source}: no [[scenario]] entries"));
    }
    let mut shared = RunConfig::default();
    let mut defaulted = Vec::new();
    apply_solver(&mut shared, raw.solver.unwrap_or_default(), &mut defaulted);
    validate(&shared).map_err(|e| format!("{source}: {e}"))?;
    let scenarios = raw
        .scenario
        .into_iter()
        .map(|spec| {
            let mut params = ModelParams::baseline();
            let mut ignored = Vec::new();
            apply_params(
                &mut params,
                spec.model.unwrap_or_default(),
                spec.econ.unwrap_or_default(),
                spec.sim.unwrap_or_default(),
                &mut ignored,
            );
            Scenario {
                name: spec.name,
                params,
                solver: spec.method.unwrap_or(Method::Both).into(),
                adjoint_mode: spec
                    .adjoint_mode
                    .map(Into::into)
                    .unwrap_or(shared.adjoint_mode),
            }
        })
        .collect();
    Ok((scenarios, shared.settings))
}
