//! Current-value Pontryagin machinery: Hamiltonian, switching coefficient,
//! the closed-form maximizing control and the costate dynamics.
//!
//! Two costate systems are available. [`AdjointMode::PaperEq9`] is the
//! historical published system, kept for comparison runs. It drops the
//! `−p_E·δ_E·e` term of the reward and flips the sign of `λ_S·α(1 − u)` in
//! the residue costate. [`AdjointMode::CorrectedFromHamiltonian`] is
//! obtained by differentiating the Hamiltonian of the objective that the
//! direct solver actually maximizes, and is the default.

use nalgebra::{Matrix3, Vector3};

use crate::model::{ModelParams, State};

/// Current-value costates `(λ_S, λ_R, λ_E)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Adjoint {
    /// Shadow price of soil [$/tC].
    pub lam_s: f64,
    /// Shadow price of residue [$/t].
    pub lam_r: f64,
    /// Shadow price of energy [$/MJ].
    pub lam_e: f64,
}

impl Adjoint {
    pub const ZERO: Adjoint = Adjoint {
        lam_s: 0.0,
        lam_r: 0.0,
        lam_e: 0.0,
    };

    pub fn new(lam_s: f64, lam_r: f64, lam_e: f64) -> Self {
        Self {
            lam_s,
            lam_r,
            lam_e,
        }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.lam_s, self.lam_r, self.lam_e)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Multiplies every component by `k`; used for the discounted
    /// (present-value) costates `e^{−δt}·λ`.
    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.lam_s * k, self.lam_r * k, self.lam_e * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum AdjointMode {
    PaperEq9,
    #[default]
    CorrectedFromHamiltonian,
}

impl AdjointMode {
    pub fn name(self) -> &'static str {
        match self {
            AdjointMode::PaperEq9 => "paper",
            AdjointMode::CorrectedFromHamiltonian => "corrected",
        }
    }
}

/// Split of the Hamiltonian into its control-free part and the coefficient
/// of `u·R`: `H(u) = h_base + h_tilde·u·R − C(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianParts {
    pub h_base: f64,
    pub h_tilde: f64,
}

/// Marginal value of diverting one unit of residue, `p_E·β − λ_S·α + λ_E·β`.
/// Identical in both adjoint modes.
pub fn switching_coefficient(lam: &Adjoint, p: &ModelParams) -> f64 {
    p.p_e * p.beta - lam.lam_s * p.alpha + lam.lam_e * p.beta
}

/// Maximizer of the Hamiltonian over `u ∈ [0, 1]`.
///
/// Zero when `h̃·R ≤ c1`, otherwise the stationary point
/// `(h̃·R − c1)/(2·c2)` capped at 1.
pub fn optimal_control(h_tilde: f64, r: f64, p: &ModelParams) -> f64 {
    let marginal = h_tilde * r;
    if marginal <= p.c1 {
        0.0
    } else {
        ((marginal - p.c1) / (2.0 * p.c2)).min(1.0)
    }
}

/// Switching function `h̃·R − c1`; the control is zero iff it is `≤ 0`.
pub fn switching_function(x: &State, lam: &Adjoint, p: &ModelParams) -> f64 {
    switching_coefficient(lam, p) * x.r - p.c1
}

/// Current-value Hamiltonian of the selected mode.
pub fn hamiltonian(x: &State, u: f64, lam: &Adjoint, p: &ModelParams, mode: AdjointMode) -> f64 {
    let eta = p.productivity().eval(x.s);
    let payoff = match mode {
        AdjointMode::PaperEq9 => p.p_e * p.beta * u * x.r + p.p_s * x.s - p.cost(u),
        AdjointMode::CorrectedFromHamiltonian => {
            p.p_e * (p.beta * u * x.r - p.delta_e * x.e) + p.p_s * x.s - p.cost(u)
        }
    };
    payoff
        + lam.lam_s * (p.alpha * (1.0 - u) * x.r - p.delta_s * x.s + p.theta * x.e)
        + lam.lam_r * (eta - p.gamma * x.r)
        + lam.lam_e * (p.beta * u * x.r - p.delta_e * x.e)
}

/// `h_base` is defined as `H(u = 0)` (with `C(0) = 0`), which makes the
/// decomposition exact in either mode.
pub fn hamiltonian_parts(
    x: &State,
    lam: &Adjoint,
    p: &ModelParams,
    mode: AdjointMode,
) -> HamiltonianParts {
    HamiltonianParts {
        h_base: hamiltonian(x, 0.0, lam, p, mode) + p.cost(0.0),
        h_tilde: switching_coefficient(lam, p),
    }
}

impl HamiltonianParts {
    pub fn evaluate(&self, u: f64, r: f64, p: &ModelParams) -> f64 {
        self.h_base + self.h_tilde * u * r - p.cost(u)
    }
}

/// Costate time derivative `dλ/dt` for the selected mode.
pub fn adjoint_rhs(
    x: &State,
    u: f64,
    lam: &Adjoint,
    p: &ModelParams,
    mode: AdjointMode,
) -> Adjoint {
    let d = p.discount;
    let deta = p.productivity().derivative(x.s);
    let Adjoint {
        lam_s,
        lam_r,
        lam_e,
    } = *lam;
    let dlam_s = d * lam_s - (p.p_s - lam_s * p.delta_s + lam_r * deta);
    match mode {
        AdjointMode::PaperEq9 => Adjoint::new(
            dlam_s,
            d * lam_r
                - ((p.p_e + lam_e) * p.beta * u - lam_s * p.alpha * (1.0 - u) - lam_r * p.gamma),
            d * lam_e - (p.theta * lam_s - lam_e * p.delta_e),
        ),
        AdjointMode::CorrectedFromHamiltonian => Adjoint::new(
            dlam_s,
            d * lam_r
                - ((p.p_e + lam_e) * p.beta * u + lam_s * p.alpha * (1.0 - u) - lam_r * p.gamma),
            d * lam_e - (-p.p_e * p.delta_e + lam_s * p.theta - lam_e * p.delta_e),
        ),
    }
}

/// `(K, c)` with `adjoint_rhs = K·λ + c` at fixed `(x, u)`, read off the
/// right-hand side itself so the integrator and the formulas cannot drift.
pub(crate) fn adjoint_affine(
    x: &State,
    u: f64,
    p: &ModelParams,
    mode: AdjointMode,
) -> (Matrix3<f64>, Vector3<f64>) {
    let c = adjoint_rhs(x, u, &Adjoint::ZERO, p, mode).to_vector();
    let mut k = Matrix3::zeros();
    for j in 0..3 {
        let mut unit = Vector3::zeros();
        unit[j] = 1.0;
        let col = adjoint_rhs(x, u, &Adjoint::from_vector(&unit), p, mode).to_vector() - c;
        k.set_column(j, &col);
    }
    (k, c)
}
