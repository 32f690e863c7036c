//! Fixed-step integration of the state system (forward) and of the costate
//! system (backward).
//!
//! For a frozen control the state dynamics are linear, `dx/dt = A(u)·x`, so
//! a Crank–Nicolson step is a single 3×3 solve. With piecewise-constant
//! controls this trapezoidal step and the implicit midpoint step coincide.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{self, check_control, state_rhs_unchecked, ModelParams, State};
use crate::pmp::{self, Adjoint, AdjointMode};

/// Uniform time grid `t0 < t1` with `n` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidConfig(format!(
                "grid needs t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 steps, got {n}"
            )));
        }
        Ok(Self { t0, t1, n })
    }

    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            t0: 0.0,
            t1: p.horizon,
            n: p.n_steps,
        }
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.node(k)).collect()
    }
}

/// Piecewise-constant control; value `k` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    values: Vec<f64>,
}

impl ControlPath {
    /// Validates every value against `[0, 1]` (with
    /// [`model::CONTROL_TOLERANCE`] slack) and clamps into the box.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .enumerate()
            .map(|(k, u)| check_control(u, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn constant(n: usize, u: f64) -> Result<Self> {
        Self::new(vec![u; n])
    }

    /// Projects arbitrary finite values onto `[0, 1]`.
    pub fn projected(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite("control"));
        }
        Ok(Self {
            values: values.into_iter().map(|u| u.clamp(0.0, 1.0)).collect(),
        })
    }

    /// Resamples onto `n` intervals, holding each source value over its
    /// share of the horizon.
    pub fn resampled(&self, n: usize) -> Self {
        let m = self.values.len();
        if m == n {
            return self.clone();
        }
        let values = (0..n)
            .map(|k| {
                let mid = (k as f64 + 0.5) / n as f64;
                self.values[((mid * m as f64) as usize).min(m - 1)]
            })
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Control sample for grid node `k`; the terminal node repeats the last
    /// interval.
    pub fn at_node(&self, k: usize) -> f64 {
        self.values[k.min(self.values.len() - 1)]
    }
}

/// Starting control for an iterative solver.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Constant(f64),
    /// Resampled onto the solver grid when lengths differ.
    Path(ControlPath),
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess::Constant(0.5)
    }
}

impl InitialGuess {
    pub fn materialize(&self, n: usize) -> Result<ControlPath> {
        match self {
            InitialGuess::Constant(u) => ControlPath::constant(n, *u),
            InitialGuess::Path(path) if path.is_empty() => {
                Err(Error::InvalidConfig("initial guess path is empty".into()))
            }
            InitialGuess::Path(path) => Ok(path.resampled(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Rk4,
    #[default]
    CrankNicolson,
}

/// States on a grid, the control that produced them and optionally the
/// costates and switching function `h̃·R − c1` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub states: Vec<State>,
    pub controls: ControlPath,
    pub adjoints: Option<Vec<Adjoint>>,
    pub switching: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn terminal_state(&self) -> State {
        *self
            .states
            .last()
            .expect("trajectory has at least two nodes")
    }

    /// Discounted (present-value) costates `e^{−δt_k}·λ_k`.
    pub fn discounted_adjoints(&self, p: &ModelParams) -> Option<Vec<Adjoint>> {
        self.adjoints.as_ref().map(|adj| {
            adj.iter()
                .enumerate()
                .map(|(k, l)| l.scaled((-p.discount * self.grid.node(k)).exp()))
                .collect()
        })
    }
}

/// Classical fourth-order Runge–Kutta step with frozen control.
pub fn rk4_step(x: &State, u: f64, h: f64, p: &ModelParams) -> Result<State> {
    let u = check_control(u, 0)?;
    let f = |y: &State| state_rhs_unchecked(y, u, p);
    let k1 = f(x);
    let k2 = f(&(*x + k1 * (0.5 * h)));
    let k3 = f(&(*x + k2 * (0.5 * h)));
    let k4 = f(&(*x + k3 * h));
    let next = *x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("RK4 step"))
    }
}

/// Trapezoidal step `x' = x + h/2·(f(x) + f(x'))`, solved exactly.
pub fn crank_nicolson_step(x: &State, u: f64, h: f64, p: &ModelParams) -> Result<State> {
    let u = check_control(u, 0)?;
    let a = model::system_matrix(u, p);
    cn_solve(&a, &x.to_vector(), h).map(|v| State::from_vector(&v))
}

fn cn_solve(a: &Matrix3<f64>, x: &Vector3<f64>, h: f64) -> Result<Vector3<f64>> {
    let eye = Matrix3::identity();
    let lhs = eye - a * (0.5 * h);
    let rhs = (eye + a * (0.5 * h)) * x;
    let next = lhs.lu().solve(&rhs).ok_or(Error::SingularStep { h })?;
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::SingularStep { h })
    }
}

/// Steps `(s0, r0, e0)` across the grid of `p`, each interval with its own
/// control value.
pub fn integrate_forward(
    controls: &ControlPath,
    p: &ModelParams,
    scheme: Scheme,
) -> Result<Trajectory> {
    p.validate()?;
    if controls.len() != p.n_steps {
        return Err(Error::GridMismatch {
            expected: p.n_steps,
            actual: controls.len(),
        });
    }
    let states = forward_states(controls.values(), p, scheme)?;
    Ok(Trajectory {
        grid: Grid::from_params(p),
        states,
        controls: controls.clone(),
        adjoints: None,
        switching: None,
    })
}

pub(crate) fn forward_states(
    controls: &[f64],
    p: &ModelParams,
    scheme: Scheme,
) -> Result<Vec<State>> {
    let h = p.step_size();
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut x = p.initial_state();
    states.push(x);
    for &u in controls {
        x = match scheme {
            Scheme::Rk4 => rk4_step(&x, u, h, p)?,
            Scheme::CrankNicolson => crank_nicolson_step(&x, u, h, p)?,
        };
        states.push(x);
    }
    Ok(states)
}

/// Integrates the costates of `mode` backward from `λ(T) = 0` with the
/// time-reversed trapezoidal rule.
///
/// On interval `k` both endpoint evaluations use `u_k`:
/// `(I + h/2·K_k)λ_k = (I − h/2·K_{k+1})λ_{k+1} − h/2·(c_k + c_{k+1})`
/// where `dλ/dt = K·λ + c`.
pub fn integrate_adjoint_backward(
    traj: &Trajectory,
    p: &ModelParams,
    mode: AdjointMode,
) -> Result<Vec<Adjoint>> {
    let n = traj.controls.len();
    if traj.states.len() != n + 1 {
        return Err(Error::GridMismatch {
            expected: n + 1,
            actual: traj.states.len(),
        });
    }
    let h = traj.grid.step();
    let eye = Matrix3::identity();
    let mut adjoints = vec![Adjoint::ZERO; n + 1];
    let mut lam = Vector3::zeros();
    for k in (0..n).rev() {
        let u = traj.controls.values()[k];
        let (k_left, c_left) = pmp::adjoint_affine(&traj.states[k], u, p, mode);
        let (k_right, c_right) = pmp::adjoint_affine(&traj.states[k + 1], u, p, mode);
        let rhs = (eye - k_right * (0.5 * h)) * lam - (c_left + c_right) * (0.5 * h);
        lam = (eye + k_left * (0.5 * h))
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularStep { h })?;
        if lam.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adjoint"));
        }
        adjoints[k] = Adjoint::from_vector(&lam);
    }
    Ok(adjoints)
}

/// Computes costates of `mode` and the node-wise switching function and
/// stores both on the trajectory.
pub fn attach_adjoints(traj: &mut Trajectory, p: &ModelParams, mode: AdjointMode) -> Result<()> {
    let adjoints = integrate_adjoint_backward(traj, p, mode)?;
    let switching = traj
        .states
        .iter()
        .zip(&adjoints)
        .map(|(x, l)| pmp::switching_function(x, l, p))
        .collect();
    traj.adjoints = Some(adjoints);
    traj.switching = Some(switching);
    Ok(())
}
