//! Segmentation of a control into lower-bound, interior and upper-bound arcs,
//! and the report type shared by both solvers.

use std::fmt;
use std::time::Duration;

use crate::integrate::Trajectory;

/// Classification threshold used by reports and scenario runs.
pub const DEFAULT_REGIME_EPS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    LowerBound,
    Interior,
    UpperBound,
}

impl RegimeKind {
    pub fn classify(u: f64, eps: f64) -> Self {
        if u <= eps {
            RegimeKind::LowerBound
        } else if u >= 1.0 - eps {
            RegimeKind::UpperBound
        } else {
            RegimeKind::Interior
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::LowerBound => "lower",
            RegimeKind::Interior => "interior",
            RegimeKind::UpperBound => "upper",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maximal run of control intervals `first..=last` sharing one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub first: usize,
    pub last: usize,
    pub start: f64,
    pub end: f64,
    /// Mean control over the run.
    pub level: f64,
}

impl Regime {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Partitions the horizon into maximal runs of equal [`RegimeKind`].
///
/// Runs shorter than two intervals are absorbed by the preceding run (the
/// following one for a leading run), so grid-scale chatter at a bound does
/// not fragment the segmentation.
pub fn classify_regimes(traj: &Trajectory, eps: f64) -> Vec<Regime> {
    let u = traj.controls.values();
    if u.is_empty() {
        return Vec::new();
    }
    let mut runs: Vec<(RegimeKind, usize, usize)> = Vec::new();
    for (k, &v) in u.iter().enumerate() {
        let kind = RegimeKind::classify(v, eps);
        match runs.last_mut() {
            Some(run) if run.0 == kind => run.2 = k,
            _ => runs.push((kind, k, k)),
        }
    }
    while let Some(i) = runs.iter().position(|r| r.2 + 1 - r.1 < 2) {
        if runs.len() == 1 {
            break;
        }
        if i == 0 {
            runs[1].1 = runs[0].1;
            runs.remove(0);
        } else {
            runs[i - 1].2 = runs[i].2;
            runs.remove(i);
        }
        // re-join neighbours that now share a kind
        let mut merged: Vec<(RegimeKind, usize, usize)> = Vec::with_capacity(runs.len());
        for run in runs.drain(..) {
            match merged.last_mut() {
                Some(prev) if prev.0 == run.0 => prev.2 = run.2,
                _ => merged.push(run),
            }
        }
        runs = merged;
    }
    runs.into_iter()
        .map(|(kind, first, last)| {
            let level = u[first..=last].iter().sum::<f64>() / (last + 1 - first) as f64;
            Regime {
                kind,
                first,
                last,
                start: traj.grid.node(first),
                end: traj.grid.node(last + 1),
                level,
            }
        })
        .collect()
}

/// Times at which consecutive regimes meet.
pub fn switch_times(regimes: &[Regime]) -> Vec<f64> {
    regimes.windows(2).map(|w| w[1].start).collect()
}

/// Greedy left-to-right match of `pattern` as a subsequence of the regime
/// kinds; returns the matched regime indices.
pub fn match_pattern(regimes: &[Regime], pattern: &[RegimeKind]) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(pattern.len());
    let mut next = 0;
    for want in pattern {
        let idx = regimes[next..].iter().position(|r| r.kind == *want)? + next;
        out.push(idx);
        next = idx + 1;
    }
    Some(out)
}

/// Transition time between two matched regimes: midpoint of the gap between
/// the end of the earlier and the start of the later (the shared boundary
/// when they are adjacent).
pub fn transition_time(regimes: &[Regime], from: usize, to: usize) -> f64 {
    0.5 * (regimes[from].end + regimes[to].start)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Backtracking shrank the step below its floor without sufficient ascent.
    LineSearchFailed {
        step: f64,
    },
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Sup-norm of the last control update: the relaxed sweep update for
    /// the sweep solver, the unit-step projected gradient `Π(u + g) − u`
    /// for the direct solver.
    pub final_control_delta: f64,
    pub regimes: Vec<Regime>,
    pub wall_time: Duration,
}
