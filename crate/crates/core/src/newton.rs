//! Damped Newton iteration and time-step control shared by both schemes.

use serde::{Deserialize, Serialize};

use crate::linsys::{AssemblyBuffer, AssemblyPlan, SparseLu};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    /// Converged when `|r|_inf <= tol`.
    pub tol: f64,
    /// Or when the full Newton update satisfies `|dx|_inf <= step_tol`.
    pub step_tol: f64,
    pub max_iter: usize,
    /// Step halvings tried by the line search before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-10, step_tol: 1e-12, max_iter: 50, max_halvings: 30 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// A square nonlinear system `r(x) = 0`.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;

    /// Writes `r(x)`. When `jac` is given, also pushes the Jacobian entries
    /// in an order that depends only on the mesh.
    fn assemble(&self, x: &[f64], r: &mut [f64], jac: Option<&mut AssemblyBuffer>) -> Result<()>;
}

/// Symbolic factorization and assembly plan reused across Newton steps.
#[derive(Default)]
pub struct SolverCache {
    plan: Option<AssemblyPlan>,
    lu: Option<SparseLu>,
}

impl SolverCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn solve(&mut self, buf: &AssemblyBuffer, rhs: &[f64]) -> Result<Vec<f64>> {
        if !self.plan.as_ref().is_some_and(|p| p.matches(buf)) {
            self.plan = Some(AssemblyPlan::new(buf)?);
            self.lu = None;
        }
        let a = self.plan.as_ref().expect("plan set").assemble(buf)?;
        if !self.lu.as_ref().is_some_and(|lu| lu.matches(&a)) {
            self.lu = Some(SparseLu::new(&a)?);
        }
        self.lu.as_ref().expect("lu set").solve(&a, rhs)
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Newton's method with backtracking on `|r|_inf`.
///
/// Unknowns flagged in `frozen` keep their value: their rows are replaced
/// by the identity and their residual entries are set to zero.
pub fn newton_solve(
    system: &impl NonlinearSystem,
    x: &mut [f64],
    frozen: Option<&[bool]>,
    settings: &NewtonSettings,
    cache: &mut SolverCache,
) -> Result<NewtonReport> {
    let n = system.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let mask = |r: &mut [f64]| {
        if let Some(f) = frozen {
            for (ri, &fz) in r.iter_mut().zip(f) {
                if fz {
                    *ri = 0.0;
                }
            }
        }
    };
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut buf = AssemblyBuffer::new(n);
    let mut filtered = AssemblyBuffer::new(n);
    for it in 0..settings.max_iter {
        buf.clear();
        system.assemble(x, &mut r, Some(&mut buf))?;
        mask(&mut r);
        let rn = inf_norm(&r);
        if !rn.is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: rn });
        }
        if rn <= settings.tol {
            return Ok(NewtonReport { iterations: it, residual: rn });
        }
        let jac = match frozen {
            None => &buf,
            Some(f) => {
                filtered.clear();
                buf.for_each(|i, j, v| {
                    if !f[i] {
                        filtered.push(i, j, v);
                    }
                });
                for (i, &fz) in f.iter().enumerate() {
                    if fz {
                        filtered.push(i, i, 1.0);
                    }
                }
                &filtered
            }
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = cache.solve(jac, &neg)?;
        let dn = inf_norm(&dx);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=settings.max_halvings {
            for k in 0..n {
                trial[k] = x[k] + alpha * dx[k];
            }
            if system.assemble(&trial, &mut r_trial, None).is_ok() {
                mask(&mut r_trial);
                let tn = inf_norm(&r_trial);
                if tn < rn || (alpha == 1.0 && dn <= settings.step_tol && tn.is_finite()) {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iterations: it + 1, residual: rn });
        }
        x.copy_from_slice(&trial);
        if alpha * dn <= settings.step_tol {
            system.assemble(x, &mut r, None)?;
            mask(&mut r);
            return Ok(NewtonReport { iterations: it + 1, residual: inf_norm(&r) });
        }
    }
    system.assemble(x, &mut r, None)?;
    mask(&mut r);
    let rn = inf_norm(&r);
    if rn <= settings.tol {
        Ok(NewtonReport { iterations: settings.max_iter, residual: rn })
    } else {
        Err(Error::NewtonDiverged { iterations: settings.max_iter, residual: rn })
    }
}

/// Advances over one interval of length `tau`.
///
/// On failure the interval is split into two halves, recursively up to
/// `max_retries` times, so the outer time grid is preserved. Returns the
/// total number of Newton iterations.
pub fn step_with_control<S: Clone>(
    state: &mut S,
    tau: f64,
    time: f64,
    max_retries: usize,
    step: &mut impl FnMut(&mut S, f64) -> Result<usize>,
) -> Result<usize> {
    fn go<S: Clone>(
        state: &mut S,
        tau: f64,
        depth: usize,
        max: usize,
        time: f64,
        step: &mut impl FnMut(&mut S, f64) -> Result<usize>,
    ) -> Result<usize> {
        let mut trial = state.clone();
        match step(&mut trial, tau) {
            Ok(it) => {
                *state = trial;
                Ok(it)
            }
            Err(Error::NewtonDiverged { .. } | Error::SingularMatrix | Error::InaccurateSolve { .. }) => {
                if depth >= max {
                    return Err(Error::StepRejected { time, retries: depth });
                }
                let a = go(state, 0.5 * tau, depth + 1, max, time, step)?;
                let b = go(state, 0.5 * tau, depth + 1, max, time + 0.5 * tau, step)?;
                Ok(a + b)
            }
            Err(e) => Err(e),
        }
    }
    go(state, tau, 0, max_retries, time, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// r_i = x_i^3 + x_i - a_i, coupled through x_0.
    struct Cubic {
        a: Vec<f64>,
    }

    impl NonlinearSystem for Cubic {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn assemble(&self, x: &[f64], r: &mut [f64], jac: Option<&mut AssemblyBuffer>) -> Result<()> {
            for i in 0..x.len() {
                r[i] = x[i].powi(3) + x[i] - self.a[i] + if i > 0 { 0.1 * x[0] } else { 0.0 };
            }
            if let Some(j) = jac {
                for i in 0..x.len() {
                    j.push(i, i, 3.0 * x[i] * x[i] + 1.0);
                    if i > 0 {
                        j.push(i, 0, 0.1);
                    }
                }
            }
            Ok(())
        }
    }

    #[test]
    fn converges_quadratically() {
        let sys = Cubic { a: vec![10.0, 2.0, -3.0] };
        let mut x = vec![0.0; 3];
        let mut cache = SolverCache::new();
        let rep = newton_solve(&sys, &mut x, None, &NewtonSettings::default(), &mut cache).unwrap();
        assert!(rep.residual <= 1e-10);
        assert!(rep.iterations < 20);
        assert!((x[0].powi(3) + x[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn frozen_unknowns_stay_fixed() {
        let sys = Cubic { a: vec![10.0, 2.0, -3.0] };
        let mut x = vec![1.5, 0.0, 0.0];
        let frozen = [true, false, false];
        let mut cache = SolverCache::new();
        newton_solve(&sys, &mut x, Some(&frozen), &NewtonSettings::default(), &mut cache).unwrap();
        assert_eq!(x[0], 1.5);
        assert!((x[1].powi(3) + x[1] - 2.0 + 0.15).abs() < 1e-10);
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let sys = Cubic { a: vec![1e6] };
        let mut x = vec![0.0];
        let s = NewtonSettings { max_iter: 2, ..Default::default() };
        let r = newton_solve(&sys, &mut x, None, &s, &mut SolverCache::new());
        assert!(matches!(r, Err(Error::NewtonDiverged { .. })));
    }

    #[test]
    fn step_control_halves_and_keeps_grid() {
        let mut times = Vec::new();
        let mut state = 0.0f64;
        let mut step = |s: &mut f64, tau: f64| {
            if tau > 0.3 {
                return Err(Error::NewtonDiverged { iterations: 1, residual: 1.0 });
            }
            *s += tau;
            times.push(tau);
            Ok(1)
        };
        let it = step_with_control(&mut state, 1.0, 0.0, 10, &mut step).unwrap();
        assert_eq!(it, 4);
        assert_eq!(state, 1.0);
        assert_eq!(times, vec![0.25; 4]);
        let mut never = |_: &mut f64, _: f64| -> Result<usize> { Err(Error::SingularMatrix) };
        assert!(matches!(
            step_with_control(&mut state, 1.0, 2.0, 3, &mut never),
            Err(Error::StepRejected { retries: 3, .. })
        ));
    }
}
