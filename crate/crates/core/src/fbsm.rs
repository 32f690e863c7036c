//! Forward–backward sweep on the Pontryagin optimality system.
//!
//! Each sweep integrates the states forward under the current control,
//! integrates the costates backward from `λ(T) = 0`, evaluates the
//! closed-form control law and relaxes toward it.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::integrate::{
    attach_adjoints, integrate_forward, ControlPath, InitialGuess, Scheme, Trajectory,
};
use crate::model::{self, ModelParams};
use crate::pmp::{optimal_control, switching_coefficient, Adjoint, AdjointMode};
use crate::regimes::{classify_regimes, SolveReport, Termination, DEFAULT_REGIME_EPS};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Weight `ω ∈ (0, 1]` of the new control in `u ← (1 − ω)u + ω·u_new`.
    pub relaxation: f64,
    /// Convergence threshold on `max_k |u_new − u|`.
    pub tol_control: f64,
    pub max_iters: usize,
    pub adjoint_mode: AdjointMode,
    pub initial_guess: InitialGuess,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            tol_control: 1e-6,
            max_iters: 1000,
            adjoint_mode: AdjointMode::default(),
            initial_guess: InitialGuess::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol_control > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol_control must be > 0, got {}",
                self.tol_control
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Control law evaluated on every interval of a trajectory with costates.
///
/// The costates and residue stock entering `h̃·R` are averaged over the
/// interval's two nodes, matching the trapezoidal weighting of the
/// transcription; at a converged sweep this is the same stationarity system
/// the direct solver satisfies.
pub fn control_from_costates(traj: &Trajectory, p: &ModelParams) -> Result<ControlPath> {
    let adj = traj
        .adjoints
        .as_ref()
        .ok_or(Error::MissingSeries("adjoints"))?;
    if adj.len() != traj.states.len() {
        return Err(Error::GridMismatch {
            expected: traj.states.len(),
            actual: adj.len(),
        });
    }
    let values = (0..traj.controls.len())
        .map(|k| {
            let lam = Adjoint::from_vector(&((adj[k].to_vector() + adj[k + 1].to_vector()) * 0.5));
            let r = 0.5 * (traj.states[k].r + traj.states[k + 1].r);
            optimal_control(switching_coefficient(&lam, p), r, p)
        })
        .collect();
    ControlPath::new(values)
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the sweep until the control update falls below `tol_control` or
/// `max_iters` sweeps are spent.
///
/// Non-convergence is not an error: the report carries
/// `converged = false` with the last update size. The returned trajectory is
/// the one whose costates produced the final update, so it satisfies the
/// control law to within that update.
pub fn solve_fbsm(p: &ModelParams, cfg: &SweepConfig) -> Result<(Trajectory, SolveReport)> {
    p.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let mut u = cfg.initial_guess.materialize(p.n_steps)?;
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    let mut traj = None;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut current = integrate_forward(&u, p, Scheme::CrankNicolson)?;
        attach_adjoints(&mut current, p, cfg.adjoint_mode)?;
        let target = control_from_costates(&current, p)?;
        delta = sup_gap(target.values(), u.values());
        traj = Some(current);
        if delta <= cfg.tol_control {
            break;
        }
        let w = cfg.relaxation;
        let relaxed = u
            .values()
            .iter()
            .zip(target.values())
            .map(|(old, new)| (1.0 - w) * old + w * new)
            .collect();
        u = ControlPath::projected(relaxed)?;
    }
    let traj = traj.expect("max_iters >= 1");
    let converged = delta <= cfg.tol_control;
    let objective = model::objective(&traj, p)?;
    let report = SolveReport {
        objective,
        iterations,
        converged,
        termination: if converged {
            Termination::Converged
        } else {
            Termination::MaxIterations
        },
        final_control_delta: delta,
        regimes: classify_regimes(&traj, DEFAULT_REGIME_EPS),
        wall_time: started.elapsed(),
    };
    Ok((traj, report))
}
