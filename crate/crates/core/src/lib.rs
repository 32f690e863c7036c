//! Optimal allocation of crop residues between bioenergy and soil fertility.
//!
//! A three-state bioeconomic model (soil organic matter, residue stock,
//! cumulative energy) with a single diversion control is solved two ways:
//!
//! * [`fbsm`]: forward–backward sweep on the Pontryagin optimality system,
//!   using the closed-form control law in [`pmp`];
//! * [`direct`]: Crank–Nicolson transcription with exact discrete-adjoint
//!   gradients and projected gradient ascent.
//!
//! [`scenarios`] runs the reference experiments and parameter sweeps.
//! Batch work (scenario fan-out, brute-force enumeration, batch objective
//! evaluation) runs on rayon when the `parallel` feature is enabled; see
//! [`Execution`].

pub mod direct;
pub mod error;
mod exec;
pub mod fbsm;
pub mod integrate;
pub mod model;
pub mod pmp;
pub mod regimes;
pub mod scenarios;

pub use error::{Error, Result};
pub use exec::Execution;
pub use integrate::{ControlPath, Grid, InitialGuess, Scheme, Trajectory};
pub use model::{ModelParams, ProductivityFn, State};
pub use pmp::{Adjoint, AdjointMode, HamiltonianParts};
pub use regimes::{classify_regimes, Regime, RegimeKind, SolveReport, Termination};
