//! Direct transcription: one control value per Crank–Nicolson interval,
//! exact gradients of the discrete objective by reverse accumulation
//! through the step equations, and projected gradient ascent on the box
//! `[0, 1]^N`.

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrate::{
    attach_adjoints, forward_states, integrate_forward, ControlPath, InitialGuess, Scheme,
    Trajectory,
};
use crate::model::{
    self, discount_weights, reward_control_derivative, reward_state_gradient, ModelParams, State,
};
use crate::pmp::AdjointMode;
use crate::regimes::{classify_regimes, SolveReport, Termination, DEFAULT_REGIME_EPS};

/// Largest candidate count [`brute_force`] will enumerate.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;

/// Backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    /// Trial step of the first iteration; later iterations start from the
    /// Barzilai–Borwein estimate.
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectConfig {
    pub max_iters: usize,
    /// Stop when `max_k |Π(u + g) − u|_k` falls to this value.
    pub tol_grad: f64,
    pub armijo: Armijo,
    pub initial_guess: InitialGuess,
    /// Costates attached to the returned trajectory for reporting.
    pub report_adjoint_mode: AdjointMode,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_grad: 1e-6,
            armijo: Armijo::default(),
            initial_guess: InitialGuess::default(),
            report_adjoint_mode: AdjointMode::CorrectedFromHamiltonian,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.tol_grad > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol_grad must be > 0, got {}",
                self.tol_grad
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(a.initial_step > 0.0 && a.initial_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial step must be > 0, got {}",
                a.initial_step
            )));
        }
        if !(a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrink factor must lie in (0, 1), got {}",
                a.shrink
            )));
        }
        if !(a.sufficient_decrease > 0.0 && a.sufficient_decrease <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "sufficient-decrease constant must lie in (0, 0.5], got {}",
                a.sufficient_decrease
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// `∂J/∂u_k` for every interval.
    pub gradient: Vec<f64>,
    /// `max_k |Π(u + g) − u|_k`.
    pub projected_gradient_norm: f64,
    pub objective: f64,
}

/// Sup-norm of the unit-step projected gradient.
pub fn projected_gradient_norm(u: &[f64], gradient: &[f64]) -> f64 {
    u.iter()
        .zip(gradient)
        .map(|(x, g)| ((x + g).clamp(0.0, 1.0) - x).abs())
        .fold(0.0, f64::max)
}

/// Discrete objective and its exact gradient.
///
/// Interval `k` advances `B_k·x_{k+1} = C_k·x_k` with
/// `B_k = I − h/2·A(u_k)`, `C_k = I + h/2·A(u_k)`, and contributes
/// `h/2·[w_k·L(x_k, u_k) + w_{k+1}·L(x_{k+1}, u_k)]`. Sweeping backward with
/// `g = ∂J/∂x_{k+1}` (including all later intervals), `B_kᵀz = g` gives
/// `∂J/∂u_k = z·(h/2)·A'(x_k + x_{k+1}) + h/2·[w_k·L_u(x_k) + w_{k+1}·L_u(x_{k+1})]`
/// and passes `C_kᵀz` plus the node's own quadrature terms back to `x_k`.
pub fn objective_and_gradient(u: &ControlPath, p: &ModelParams) -> Result<GradientReport> {
    p.validate()?;
    if u.len() != p.n_steps {
        return Err(Error::GridMismatch {
            expected: p.n_steps,
            actual: u.len(),
        });
    }
    let controls = u.values();
    let states = forward_states(controls, p, Scheme::CrankNicolson)?;
    let objective = model::objective_unchecked(&states, controls, p);
    let gradient = discrete_adjoint_gradient(&states, controls, p)?;
    let projected_gradient_norm = projected_gradient_norm(controls, &gradient);
    Ok(GradientReport {
        gradient,
        projected_gradient_norm,
        objective,
    })
}

fn discrete_adjoint_gradient(
    states: &[State],
    controls: &[f64],
    p: &ModelParams,
) -> Result<Vec<f64>> {
    let n = controls.len();
    let h = p.step_size();
    let half = 0.5 * h;
    let w = discount_weights(p);
    let eye = Matrix3::<f64>::identity();
    let da = model::system_matrix_du(p);
    let mut gradient = vec![0.0; n];
    let mut g: Vector3<f64> = reward_state_gradient(controls[n - 1], p) * (half * w[n]);
    for k in (0..n).rev() {
        let u = controls[k];
        let a = model::system_matrix(u, p);
        let z = (eye - a * half)
            .transpose()
            .lu()
            .solve(&g)
            .ok_or(Error::SingularStep { h })?;
        let (xl, xr) = (&states[k], &states[k + 1]);
        let through_step = z.dot(&(da * (xl.to_vector() + xr.to_vector()))) * half;
        let quadrature = half
            * (w[k] * reward_control_derivative(xl, u, p)
                + w[k + 1] * reward_control_derivative(xr, u, p));
        gradient[k] = through_step + quadrature;
        g = (eye + a * half).transpose() * z + reward_state_gradient(u, p) * (half * w[k]);
        if k > 0 {
            g += reward_state_gradient(controls[k - 1], p) * (half * w[k]);
        }
    }
    if gradient.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(gradient)
}

/// Per-iteration record passed to [`solve_direct_observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub iteration: usize,
    pub objective: f64,
    pub projected_gradient_norm: f64,
    /// Accepted backtracking factor.
    pub step: f64,
}

/// Smallest backtracking factor tried before the line search gives up.
const MIN_BACKTRACK: f64 = 1e-14;
const SPECTRAL_BOUNDS: (f64, f64) = (1e-10, 1e10);

/// [`solve_direct_observed`] without an observer.
pub fn solve_direct(p: &ModelParams, cfg: &DirectConfig) -> Result<(Trajectory, SolveReport)> {
    solve_direct_observed(p, cfg, |_| {})
}

/// Spectral projected gradient ascent with monotone Armijo backtracking.
///
/// The search direction is `d = Π(u + s·g) − u` with `s` the
/// Barzilai–Borwein step from the previous iterate pair; trial points
/// `u + t·d`, `t = 1, shrink, shrink², …` stay inside the box and are
/// accepted once `J(u + t·d) ≥ J(u) + c·t·g·d`. The observer sees every
/// accepted iterate.
pub fn solve_direct_observed<F>(
    p: &ModelParams,
    cfg: &DirectConfig,
    mut observer: F,
) -> Result<(Trajectory, SolveReport)>
where
    F: FnMut(&IterationInfo),
{
    p.validate()?;
    cfg.validate()?;
    let started = Instant::now();
    let mut u = cfg.initial_guess.materialize(p.n_steps)?;
    let mut current = objective_and_gradient(&u, p)?;
    let mut spectral = cfg.armijo.initial_step;
    let mut iterations = 0;
    let termination = loop {
        if current.projected_gradient_norm <= cfg.tol_grad {
            break Termination::Converged;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }
        iterations += 1;
        let direction: Vec<f64> = u
            .values()
            .iter()
            .zip(&current.gradient)
            .map(|(x, g)| (x + spectral * g).clamp(0.0, 1.0) - x)
            .collect();
        let slope: f64 = direction
            .iter()
            .zip(&current.gradient)
            .map(|(d, g)| d * g)
            .sum();
        let mut t = 1.0;
        let accepted = loop {
            let trial = ControlPath::projected(
                u.values()
                    .iter()
                    .zip(&direction)
                    .map(|(x, d)| x + t * d)
                    .collect(),
            )?;
            let eval = objective_and_gradient(&trial, p)?;
            if eval.objective >= current.objective + cfg.armijo.sufficient_decrease * t * slope {
                break Some((trial, eval));
            }
            t *= cfg.armijo.shrink;
            if t < MIN_BACKTRACK {
                break None;
            }
        };
        let Some((next, eval)) = accepted else {
            break Termination::LineSearchFailed { step: t * spectral };
        };
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..next.len() {
            let ds = next.values()[k] - u.values()[k];
            ss += ds * ds;
            sy += ds * (eval.gradient[k] - current.gradient[k]);
        }
        // ascent on a locally concave objective gives sy < 0
        if sy < 0.0 && ss > 0.0 {
            spectral = (ss / -sy).clamp(SPECTRAL_BOUNDS.0, SPECTRAL_BOUNDS.1);
        }
        u = next;
        current = eval;
        observer(&IterationInfo {
            iteration: iterations,
            objective: current.objective,
            projected_gradient_norm: current.projected_gradient_norm,
            step: t,
        });
    };
    let mut traj = integrate_forward(&u, p, Scheme::CrankNicolson)?;
    attach_adjoints(&mut traj, p, cfg.report_adjoint_mode)?;
    let report = SolveReport {
        objective: current.objective,
        iterations,
        converged: termination == Termination::Converged,
        termination,
        final_control_delta: current.projected_gradient_norm,
        regimes: classify_regimes(&traj, DEFAULT_REGIME_EPS),
        wall_time: started.elapsed(),
    };
    Ok((traj, report))
}

/// Discrete objective of many controls, evaluated as one batch.
pub fn evaluate_batch(
    controls: &[ControlPath],
    p: &ModelParams,
    exec: Execution,
) -> Vec<Result<f64>> {
    exec::map_indexed(exec, controls.len(), |i| {
        let traj = integrate_forward(&controls[i], p, Scheme::CrankNicolson)?;
        model::objective(&traj, p)
    })
}

/// State map and reward of one control segment held at one level.
struct SegmentMap {
    m: Matrix3<f64>,
    c: Vector3<f64>,
    d: f64,
}

/// Exhaustive search over piecewise-constant controls with `n_segments`
/// equal segments and `levels` evenly spaced values `0, 1/(levels−1), …, 1`.
///
/// Fine-grid interval `k` belongs to segment `⌊k·n_segments/N⌋`. Ties are
/// broken toward the lexicographically smallest level sequence, so the
/// result does not depend on the execution strategy.
pub fn brute_force(
    p: &ModelParams,
    n_segments: usize,
    levels: usize,
    exec: Execution,
) -> Result<(ControlPath, f64)> {
    p.validate()?;
    if n_segments == 0 || n_segments > p.n_steps {
        return Err(Error::InvalidConfig(format!(
            "n_segments must lie in 1..={}, got {n_segments}",
            p.n_steps
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidConfig(format!(
            "levels must be >= 2, got {levels}"
        )));
    }
    let count = (levels as u64)
        .checked_pow(n_segments as u32)
        .filter(|&c| c <= BRUTE_FORCE_BUDGET)
        .ok_or(Error::CombinatorialBudget {
            levels,
            segments: n_segments,
            budget: BRUTE_FORCE_BUDGET,
        })?;
    let level_values: Vec<f64> = (0..levels)
        .map(|j| j as f64 / (levels - 1) as f64)
        .collect();
    let h = p.step_size();
    let eye = Matrix3::identity();
    let propagators = level_values
        .iter()
        .map(|&u| {
            let a = model::system_matrix(u, p);
            let inv = (eye - a * (0.5 * h))
                .try_inverse()
                .ok_or(Error::SingularStep { h })?;
            Ok(inv * (eye + a * (0.5 * h)))
        })
        .collect::<Result<Vec<Matrix3<f64>>>>()?;
    let segment_of: Vec<usize> = (0..p.n_steps).map(|k| k * n_segments / p.n_steps).collect();
    let weights = discount_weights(p);

    // Dynamics and reward are affine in the state, so each (segment, level)
    // pair collapses to x ↦ M·x with reward c·x_start + d.
    let mut blocks: Vec<Vec<SegmentMap>> = Vec::with_capacity(n_segments);
    let mut k = 0;
    for seg in 0..n_segments {
        let first = k;
        while k < p.n_steps && segment_of[k] == seg {
            k += 1;
        }
        let row = level_values
            .iter()
            .zip(&propagators)
            .map(|(&u, prop)| {
                let g = reward_state_gradient(u, p);
                let constant = -p.cost(u);
                let mut m = eye;
                let mut block = SegmentMap {
                    m: eye,
                    c: Vector3::zeros(),
                    d: 0.0,
                };
                for j in first..k {
                    let next = prop * m;
                    block.c += (m.transpose() * g) * (0.5 * h * weights[j])
                        + (next.transpose() * g) * (0.5 * h * weights[j + 1]);
                    block.d += 0.5 * h * (weights[j] + weights[j + 1]) * constant;
                    m = next;
                }
                block.m = m;
                block
            })
            .collect();
        blocks.push(row);
    }
    let x0 = p.initial_state().to_vector();

    let evaluate = |index: usize| -> (f64, usize) {
        let mut rest = index;
        let mut digits = vec![0usize; n_segments];
        for d in digits.iter_mut().rev() {
            *d = rest % levels;
            rest /= levels;
        }
        let mut x = x0;
        let mut total = 0.0;
        for (seg, &level) in digits.iter().enumerate() {
            let block = &blocks[seg][level];
            total += block.c.dot(&x) + block.d;
            x = block.m * x;
        }
        (total, index)
    };
    let pick = |a: (f64, usize), b: (f64, usize)| {
        if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
            a
        } else {
            b
        }
    };
    let (_, best) = exec::reduce_indexed(
        exec,
        count as usize,
        (f64::NEG_INFINITY, usize::MAX),
        evaluate,
        pick,
    );

    let mut digits = vec![0usize; n_segments];
    let mut rest = best;
    for d in digits.iter_mut().rev() {
        *d = rest % levels;
        rest /= levels;
    }
    let control = ControlPath::new(
        segment_of
            .iter()
            .map(|&s| level_values[digits[s]])
            .collect(),
    )?;
    let traj = integrate_forward(&control, p, Scheme::CrankNicolson)?;
    let value = model::objective(&traj, p)?;
    Ok((control, value))
}
