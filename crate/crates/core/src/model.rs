//! Problem data, state dynamics and the discounted objective.
//!
//! The three states are soil organic matter `s` [tC/ha], residue biomass `r`
//! [t/ha] and cumulative usable energy `e` [MJ/ha]. The single control
//! `u ∈ [0, 1]` is the fraction of residue diverted to energy:
//!
//! ```text
//! ds/dt = α(1 − u)r − δ_S s + θe
//! dr/dt = η(s) − γr
//! de/dt = βur − δ_E e
//! ```
//!
//! Units are documentation only.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;

/// Slack allowed on the `[0, 1]` control box before a value is rejected.
pub const CONTROL_TOLERANCE: f64 = 1e-12;

/// Biophysical and economic coefficients, horizon and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Soil enrichment per unit of returned residue [tC/t].
    pub alpha: f64,
    /// Soil organic matter decay [1/yr].
    pub delta_s: f64,
    /// Residue productivity per unit fertility [t/(tC·yr)].
    pub rho: f64,
    /// Residue loss rate [1/yr].
    pub gamma: f64,
    /// Energy yield per ton of residue [MJ/t].
    pub beta: f64,
    /// Decay of the usable energy stock [1/yr].
    pub delta_e: f64,
    /// Reinvestment of the energy stock into soil [tC/(MJ·yr)].
    pub theta: f64,
    /// Economic discount rate [1/yr].
    pub discount: f64,
    /// Unit energy price [$/MJ].
    pub p_e: f64,
    /// Value of soil fertility [$/tC].
    pub p_s: f64,
    /// Linear diversion cost [$/ha·yr].
    pub c1: f64,
    /// Quadratic diversion cost [$/ha·yr].
    pub c2: f64,
    /// Final time [yr].
    pub horizon: f64,
    /// Number of uniform time steps.
    pub n_steps: usize,
    pub s0: f64,
    pub r0: f64,
    pub e0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ModelParams {
    /// Reference calibration: 25-year horizon on a 2000-step grid with
    /// reinvestment efficiency 0.2, starting from (1.0, 0.5, 0.0).
    pub fn baseline() -> Self {
        Self {
            alpha: 0.25,
            delta_s: 0.05,
            rho: 0.5,
            gamma: 0.2,
            beta: 0.35,
            delta_e: 0.03,
            theta: 0.2,
            discount: 0.02,
            p_e: 1.0,
            p_s: 0.8,
            c1: 0.8,
            c2: 1.0,
            horizon: 25.0,
            n_steps: 2000,
            s0: 1.0,
            r0: 0.5,
            e0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("delta_S", self.delta_s),
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("discount", self.discount),
            ("p_S", self.p_s),
            ("c1", self.c1),
            ("c2", self.c2),
            ("T", self.horizon),
            ("S0", self.s0),
            ("R0", self.r0),
        ];
        let nonnegative = [
            ("theta", self.theta),
            ("delta_E", self.delta_e),
            ("p_E", self.p_e),
            ("E0", self.e0),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be > 0",
                });
            }
        }
        for (name, value) in nonnegative {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be >= 0",
                });
            }
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: self.n_steps as f64,
                reason: "must be >= 2",
            });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State::new(self.s0, self.r0, self.e0)
    }

    pub fn productivity(&self) -> ProductivityFn {
        ProductivityFn::Linear { rho: self.rho }
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Quadratic diversion cost `c1·u + c2·u²`.
    pub fn cost(&self, u: f64) -> f64 {
        self.c1 * u + self.c2 * u * u
    }

    pub fn cost_derivative(&self, u: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * u
    }
}

/// `(s, r, e)`: soil organic matter, residue stock, cumulative energy.
///
/// Also used for state derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub s: f64,
    pub r: f64,
    pub e: f64,
}

impl State {
    pub const ZERO: State = State {
        s: 0.0,
        r: 0.0,
        e: 0.0,
    };

    pub fn new(s: f64, r: f64, e: f64) -> Self {
        Self { s, r, e }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.s, self.r, self.e)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.r.is_finite() && self.e.is_finite()
    }

    pub fn min_component(&self) -> f64 {
        self.s.min(self.r).min(self.e)
    }

    pub fn max_abs(&self) -> f64 {
        self.s.abs().max(self.r.abs()).max(self.e.abs())
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.s + o.s, self.r + o.r, self.e + o.e)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.s - o.s, self.r - o.r, self.e - o.e)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, k: f64) -> State {
        State::new(self.s * k, self.r * k, self.e * k)
    }
}

/// Residue productivity as a function of soil fertility, `η(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProductivityFn {
    /// `η(s) = ρ·s`.
    Linear { rho: f64 },
}

impl ProductivityFn {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ProductivityFn::Linear { rho } => rho * s,
        }
    }

    pub fn derivative(&self, _s: f64) -> f64 {
        match *self {
            ProductivityFn::Linear { rho } => rho,
        }
    }
}

/// Rejects non-finite controls and controls outside `[0, 1]` beyond
/// [`CONTROL_TOLERANCE`]; returns the value clamped into the box.
pub fn check_control(u: f64, index: usize) -> Result<f64> {
    if !u.is_finite() || !(-CONTROL_TOLERANCE..=1.0 + CONTROL_TOLERANCE).contains(&u) {
        return Err(Error::ControlOutOfRange { index, value: u });
    }
    Ok(u.clamp(0.0, 1.0))
}

fn check_state(x: &State) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("state"))
    }
}

/// Right-hand side of the state system for a frozen control.
pub fn state_rhs(x: &State, u: f64, p: &ModelParams) -> Result<State> {
    let u = check_control(u, 0)?;
    check_state(x)?;
    Ok(state_rhs_unchecked(x, u, p))
}

pub(crate) fn state_rhs_unchecked(x: &State, u: f64, p: &ModelParams) -> State {
    State::new(
        p.alpha * (1.0 - u) * x.r - p.delta_s * x.s + p.theta * x.e,
        p.productivity().eval(x.s) - p.gamma * x.r,
        p.beta * u * x.r - p.delta_e * x.e,
    )
}

/// Matrix `A(u)` with `dx/dt = A(u)·x` for the linear productivity model.
#[rustfmt::skip]
pub fn system_matrix(u: f64, p: &ModelParams) -> Matrix3<f64> {
    let ProductivityFn::Linear { rho } = p.productivity();
    Matrix3::new(
        -p.delta_s, p.alpha * (1.0 - u), p.theta,
        rho, -p.gamma, 0.0,
        0.0, p.beta * u, -p.delta_e,
    )
}

/// `∂A/∂u`, constant in `u`.
#[rustfmt::skip]
pub(crate) fn system_matrix_du(p: &ModelParams) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -p.alpha, 0.0,
        0.0, 0.0, 0.0,
        0.0, p.beta, 0.0,
    )
}

/// Undiscounted reward rate `p_E·de/dt + p_S·s − C(u)`, with `de/dt`
/// taken from the energy equation.
pub fn running_reward(x: &State, u: f64, p: &ModelParams) -> Result<f64> {
    let u = check_control(u, 0)?;
    check_state(x)?;
    Ok(running_reward_unchecked(x, u, p))
}

pub(crate) fn running_reward_unchecked(x: &State, u: f64, p: &ModelParams) -> f64 {
    p.p_e * (p.beta * u * x.r - p.delta_e * x.e) + p.p_s * x.s - p.cost(u)
}

/// Gradient of the reward rate with respect to the state. Independent of the
/// state because the reward is affine in it.
pub(crate) fn reward_state_gradient(u: f64, p: &ModelParams) -> Vector3<f64> {
    Vector3::new(p.p_s, p.p_e * p.beta * u, -p.p_e * p.delta_e)
}

pub(crate) fn reward_control_derivative(x: &State, u: f64, p: &ModelParams) -> f64 {
    p.p_e * p.beta * x.r - p.cost_derivative(u)
}

/// Discount factors `exp(−δ·t_k)` on the uniform grid of `p`.
pub(crate) fn discount_weights(p: &ModelParams) -> Vec<f64> {
    let h = p.step_size();
    (0..=p.n_steps)
        .map(|k| (-p.discount * k as f64 * h).exp())
        .collect()
}

/// Discounted objective of a trajectory by trapezoidal quadrature.
///
/// Interval `k` contributes `h/2·[w_k·L(x_k, u_k) + w_{k+1}·L(x_{k+1}, u_k)]`:
/// both endpoints use the interval's own control, which is the quadrature
/// the Crank–Nicolson transcription differentiates exactly.
pub fn objective(traj: &Trajectory, p: &ModelParams) -> Result<f64> {
    let expected = p.n_steps + 1;
    if traj.states.len() != expected {
        return Err(Error::GridMismatch {
            expected,
            actual: traj.states.len(),
        });
    }
    if traj.controls.len() != p.n_steps {
        return Err(Error::GridMismatch {
            expected: p.n_steps,
            actual: traj.controls.len(),
        });
    }
    for (k, &u) in traj.controls.values().iter().enumerate() {
        check_control(u, k)?;
    }
    Ok(objective_unchecked(&traj.states, traj.controls.values(), p))
}

pub(crate) fn objective_unchecked(states: &[State], controls: &[f64], p: &ModelParams) -> f64 {
    let h = p.step_size();
    let mut w_left = 1.0;
    let mut total = 0.0;
    for (k, &u) in controls.iter().enumerate() {
        let w_right = (-p.discount * (k + 1) as f64 * h).exp();
        total += 0.5
            * h
            * (w_left * running_reward_unchecked(&states[k], u, p)
                + w_right * running_reward_unchecked(&states[k + 1], u, p));
        w_left = w_right;
    }
    total
}
