//! Experiment drivers: time runs, convergence studies, current-voltage
//! sweeps and cross-scheme comparisons.
//!
//! Every numerical kernel is single-threaded; independent runs are spread
//! over the rayon pool.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, ConvergenceTable, Norm, TimeSeriesRecord};
use crate::fem::{Fem, FemParams, NodalState};
use crate::fvm::{CellState, FvMode, FvParams, Fvm};
use crate::newton::SolverCache;
use crate::scenarios::Scenario;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Fe,
    Fv,
    FvSemi,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fe" => Ok(Scheme::Fe),
            "fv" => Ok(Scheme::Fv),
            "fv-semi" => Ok(Scheme::FvSemi),
            _ => Err(Error::Config(format!("unknown scheme {s:?} (expected fe, fv or fv-semi)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Fe => "fe",
            Scheme::Fv => "fv",
            Scheme::FvSemi => "fv-semi",
        })
    }
}

/// A discrete state of either scheme.
#[derive(Clone, Debug, PartialEq)]
pub enum SolverState {
    Fe(NodalState),
    Fv(CellState),
}

/// A scheme bound to a scenario.
pub enum Solver<'a> {
    Fe(Fem<'a>, FemParams),
    Fv(Fvm<'a>, FvParams),
}

impl<'a> Solver<'a> {
    pub fn new(scenario: &'a Scenario, scheme: Scheme) -> Result<Self> {
        scenario.validate()?;
        Ok(match scheme {
            Scheme::Fe => Solver::Fe(Fem::new(scenario)?, FemParams::from_scenario(scenario)),
            Scheme::Fv => Solver::Fv(Fvm::new(scenario)?, FvParams::from_scenario(scenario, FvMode::FullyImplicit)),
            Scheme::FvSemi => Solver::Fv(Fvm::new(scenario)?, FvParams::from_scenario(scenario, FvMode::SemiImplicit)),
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        match self {
            Solver::Fe(f, _) => f.scenario,
            Solver::Fv(f, _) => f.scenario,
        }
    }

    pub fn initial(&self, cache: &mut SolverCache) -> Result<SolverState> {
        Ok(match self {
            Solver::Fe(f, _) => SolverState::Fe(f.initial_state()?),
            Solver::Fv(f, _) => SolverState::Fv(f.initial_state(cache)?),
        })
    }

    /// One time step of the scenario's `tau`; returns Newton iterations.
    pub fn advance(&self, s: &mut SolverState, time: f64, cache: &mut SolverCache) -> Result<usize> {
        match (self, s) {
            (Solver::Fe(f, p), SolverState::Fe(s)) => f.advance(s, p, time, cache),
            (Solver::Fv(f, p), SolverState::Fv(s)) => f.advance(s, p, time, cache),
            _ => Err(Error::MeshMismatch("state belongs to the other scheme".into())),
        }
    }

    pub fn stationary(&self, start: &SolverState, cache: &mut SolverCache) -> Result<SolverState> {
        match (self, start) {
            (Solver::Fe(f, p), SolverState::Fe(s)) => Ok(SolverState::Fe(f.solve_stationary(s, p, cache)?)),
            (Solver::Fv(f, p), SolverState::Fv(s)) => Ok(SolverState::Fv(f.solve_stationary(s, p, cache)?)),
            _ => Err(Error::MeshMismatch("state belongs to the other scheme".into())),
        }
    }

    pub fn record(
        &self,
        s: &SolverState,
        steady: Option<&SolverState>,
        step: usize,
        time: f64,
        iters: usize,
    ) -> Result<TimeSeriesRecord> {
        match (self, s, steady) {
            (Solver::Fe(f, _), SolverState::Fe(s), None) => diagnostics::fe_record(f, s, None, step, time, iters),
            (Solver::Fe(f, _), SolverState::Fe(s), Some(SolverState::Fe(ss))) => {
                diagnostics::fe_record(f, s, Some(ss), step, time, iters)
            }
            (Solver::Fv(f, _), SolverState::Fv(s), None) => diagnostics::fv_record(f, s, None, step, time, iters),
            (Solver::Fv(f, _), SolverState::Fv(s), Some(SolverState::Fv(ss))) => {
                diagnostics::fv_record(f, s, Some(ss), step, time, iters)
            }
            _ => Err(Error::MeshMismatch("state belongs to the other scheme".into())),
        }
    }

    /// Cell values `(u, Phi)`; FE states are projected.
    pub fn cells(&self, s: &SolverState) -> Result<CellState> {
        match (self, s) {
            (Solver::Fe(f, _), SolverState::Fe(s)) => diagnostics::project_fe_to_fv(f, s),
            (Solver::Fv(_, _), SolverState::Fv(s)) => Ok(s.clone()),
            _ => Err(Error::MeshMismatch("state belongs to the other scheme".into())),
        }
    }

    pub fn current(&self, s: &SolverState, x0: f64) -> Result<f64> {
        match (self, s) {
            (Solver::Fe(f, _), SolverState::Fe(s)) => diagnostics::fe_current(f, s, x0),
            (Solver::Fv(f, _), SolverState::Fv(s)) => diagnostics::fv_current(f, s, x0),
            _ => Err(Error::MeshMismatch("state belongs to the other scheme".into())),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Compute the steady state first and report distances to it.
    pub steady: bool,
    /// Steps at which the cell values are kept.
    pub checkpoints: Vec<usize>,
}

pub struct RunResult {
    /// Diagnostics of the initial state.
    pub initial: TimeSeriesRecord,
    /// One record per output step, starting after the first step.
    pub records: Vec<TimeSeriesRecord>,
    pub final_state: SolverState,
    pub steady: Option<SolverState>,
    /// `(step, cell values)` for every requested checkpoint reached.
    pub checkpoints: Vec<(usize, CellState)>,
}

/// Time-steps `scenario.steps` steps, recording every `output_every` steps
/// and the last one.
pub fn run(scenario: &Scenario, scheme: Scheme, opts: &RunOptions) -> Result<RunResult> {
    let solver = Solver::new(scenario, scheme)?;
    let mut cache = SolverCache::new();
    let mut state = solver.initial(&mut cache)?;
    let steady = if opts.steady {
        let mut c = SolverCache::new();
        Some(solver.stationary(&state, &mut c)?)
    } else {
        None
    };
    let initial = solver.record(&state, steady.as_ref(), 0, 0.0, 0)?;
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    if opts.checkpoints.contains(&0) {
        checkpoints.push((0, solver.cells(&state)?));
    }
    for k in 1..=scenario.steps {
        let t0 = (k - 1) as f64 * scenario.tau;
        let iters = solver.advance(&mut state, t0, &mut cache)?;
        if k % scenario.output_every == 0 || k == scenario.steps {
            records.push(solver.record(&state, steady.as_ref(), k, k as f64 * scenario.tau, iters)?);
        }
        if opts.checkpoints.contains(&k) {
            checkpoints.push((k, solver.cells(&state)?));
        }
    }
    Ok(RunResult { initial, records, final_state: state, steady, checkpoints })
}

/// Quantity names for a cell comparison: `u1..un`, then `phi`.
pub fn quantity_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("u{i}")).chain(std::iter::once("phi".to_string())).collect()
}

/// Per-quantity cell norm of `a - b` with cell areas `areas`.
pub fn cell_errors(a: &CellState, b: &CellState, areas: &[f64], which: Norm) -> Result<Vec<f64>> {
    let m = a.n + 1;
    (0..m)
        .map(|q| {
            let va: Vec<f64> = a.x.iter().skip(q).step_by(m).copied().collect();
            let vb: Vec<f64> = b.x.iter().skip(q).step_by(m).copied().collect();
            diagnostics::norm(&va, &vb, areas, which)
        })
        .collect()
}

/// Cell values of one mesh level at the requested checkpoints.
#[derive(Clone, Debug)]
pub struct LevelRun {
    pub level: usize,
    pub h: f64,
    pub areas: Vec<f64>,
    pub checkpoints: Vec<(usize, CellState)>,
}

/// Runs `make(level)` for every level up to the last checkpoint.
pub fn level_runs(
    make: impl Fn(usize) -> Result<Scenario> + Sync,
    scheme: Scheme,
    levels: &[usize],
    checkpoints: &[usize],
) -> Result<Vec<LevelRun>> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let steps = *checkpoints.iter().max().ok_or(Error::InsufficientRows { needed: 1, got: 0 })?;
    let runs: Vec<Result<LevelRun>> = levels
        .par_iter()
        .map(|&level| {
            let mut s = make(level)?;
            s.steps = steps;
            s.output_every = steps.max(1);
            let r = run(&s, scheme, &RunOptions { steady: false, checkpoints: checkpoints.to_vec() })?;
            Ok(LevelRun { level, h: s.mesh.diameter(), areas: s.mesh.areas().to_vec(), checkpoints: r.checkpoints })
        })
        .collect();
    runs.into_iter().collect()
}

/// Errors of the coarse levels against the finest one, per checkpoint.
///
/// Levels must be nested by regular refinement; coarse cell values are
/// compared with the fine cell averages restricted to the coarse cells.
pub fn convergence_tables(runs: &[LevelRun]) -> Result<Vec<(usize, ConvergenceTable)>> {
    if runs.len() < 2 {
        return Err(Error::InsufficientRows { needed: 2, got: runs.len() });
    }
    let fine = runs.last().expect("at least two levels");
    let mut out = Vec::new();
    for (ci, (k, reference)) in fine.checkpoints.iter().enumerate() {
        let mut table = ConvergenceTable::new(quantity_names(reference.n));
        for r in &runs[..runs.len() - 1] {
            let restricted = diagnostics::restrict_state(reference, fine.level - r.level);
            table.push(r.level, r.h, cell_errors(&r.checkpoints[ci].1, &restricted, &r.areas, Norm::L1)?)?;
        }
        out.push((*k, table));
    }
    Ok(out)
}

/// [`level_runs`] followed by [`convergence_tables`]; the finest of `levels`
/// is the reference.
pub fn convergence_study(
    make: impl Fn(usize) -> Result<Scenario> + Sync,
    scheme: Scheme,
    levels: &[usize],
    checkpoints: &[usize],
) -> Result<Vec<(usize, ConvergenceTable)>> {
    let mut distinct = levels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientRows { needed: 2, got: distinct.len() });
    }
    convergence_tables(&level_runs(make, scheme, levels, checkpoints)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub voltage: f64,
    pub current: std::result::Result<f64, String>,
}

/// Stationary current for every applied voltage. Points are independent and
/// run concurrently; a failed point is recorded and the sweep continues.
pub fn cv_sweep(base: &Scenario, scheme: Scheme, voltages: &[f64]) -> Vec<SweepPoint> {
    voltages
        .par_iter()
        .map(|&u| SweepPoint { voltage: u, current: stationary_current(base, scheme, u).map_err(|e| e.to_string()) })
        .collect()
}

pub fn stationary_current(base: &Scenario, scheme: Scheme, voltage: f64) -> Result<f64> {
    let mut s = base.clone();
    s.set_voltage(voltage)?;
    let x0 = s.cross_section.ok_or_else(|| Error::Config("scenario has no cross-section".into()))?;
    let solver = Solver::new(&s, scheme)?;
    let mut cache = SolverCache::new();
    let init = solver.initial(&mut cache)?;
    let steady = solver.stationary(&init, &mut cache)?;
    solver.current(&steady, x0)
}

/// FE and FV solutions after `steps` steps on the same mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeGap {
    pub quantities: Vec<String>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
}

/// Differences between the fully implicit FV solution and the projected FE
/// solution after `steps` steps.
pub fn cross_scheme_gap(scenario: &Scenario, steps: usize) -> Result<SchemeGap> {
    let mut s = scenario.clone();
    s.steps = steps;
    s.output_every = steps.max(1);
    let opts = RunOptions { steady: false, checkpoints: vec![steps] };
    let (fe, fv) = rayon::join(|| run(&s, Scheme::Fe, &opts), || run(&s, Scheme::Fv, &opts));
    let (fe, fv) = (fe?, fv?);
    scheme_gap(&fe.checkpoints[0].1, &fv.checkpoints[0].1, s.mesh.areas())
}

pub fn scheme_gap(fe: &CellState, fv: &CellState, areas: &[f64]) -> Result<SchemeGap> {
    Ok(SchemeGap {
        quantities: quantity_names(fe.n),
        l1: cell_errors(fe, fv, areas, Norm::L1)?,
        linf: cell_errors(fe, fv, areas, Norm::LInf)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Fe, Scheme::Fv, Scheme::FvSemi] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("fd".parse::<Scheme>().is_err());
    }

    #[test]
    fn single_level_is_rejected() {
        let r = convergence_study(crate::scenarios::calcium_channel, Scheme::Fv, &[1, 1], &[1]);
        assert!(matches!(r, Err(Error::InsufficientRows { .. })));
    }

    #[test]
    fn quantity_names_end_with_potential() {
        assert_eq!(quantity_names(2), ["u1", "u2", "phi"]);
    }
}
