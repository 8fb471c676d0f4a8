//! Implicit Euler two-point-flux finite volumes with double upwinding.
//!
//! Unknowns are cell values `(u_1..u_n, Phi)` stored interleaved,
//! cell-major. The solvent fraction `u_0 = 1 - sum u_i - c_K` is eliminated.
//! The flux across edge `sigma` of cell `K` is
//!
//! ```text
//! F = -tau_s D_i ( u0_s D(u_i) - u_is V ),   V = D(u_0) - u0hat beta z_i D(Phi)
//! ```
//!
//! with `u0_s = max(u0_K, u0_L)`, `u0hat` upwinded on `z_i D(Phi)` and `u_is`
//! upwinded on `V`; ties select the `K` side.

use serde::{Deserialize, Serialize};

use crate::linsys::AssemblyBuffer;
use crate::mesh::{EdgeKind, Point, TriMesh};
use crate::model::SpeciesSystem;
use crate::newton::{self, NewtonReport, NewtonSettings, NonlinearSystem, SolverCache};
use crate::scenarios::Scenario;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FvMode {
    #[default]
    FullyImplicit,
    /// Transport with the previous potential, then one linear Poisson solve.
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FvParams {
    pub tau: f64,
    pub mode: FvMode,
    pub newton: NewtonSettings,
    pub max_retries: usize,
}

impl FvParams {
    pub fn from_scenario(s: &Scenario, mode: FvMode) -> Self {
        FvParams { tau: s.tau, mode, newton: s.newton, max_retries: s.max_retries }
    }
}

/// Cell concentrations and potential, interleaved per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub n: usize,
    pub x: Vec<f64>,
}

impl CellState {
    pub fn n_cells(&self) -> usize {
        self.x.len() / (self.n + 1)
    }
    pub fn u(&self, k: usize) -> &[f64] {
        let m = self.n + 1;
        &self.x[k * m..k * m + self.n]
    }
    pub fn phi(&self, k: usize) -> f64 {
        self.x[k * (self.n + 1) + self.n]
    }
    /// Per-species vector over cells.
    pub fn species(&self, i: usize) -> Vec<f64> {
        (0..self.n_cells()).map(|k| self.x[k * (self.n + 1) + i]).collect()
    }
    pub fn phi_vec(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|k| self.phi(k)).collect()
    }
}

/// `D_{K,sigma}(v) = v_{K,sigma} - v_K`.
pub fn discrete_gradient(v_k: f64, other: Option<f64>) -> f64 {
    match other {
        Some(v) => v - v_k,
        None => 0.0,
    }
}

/// Flux value and its partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxEval {
    pub value: f64,
    /// `dF / du_{j,K}` for `j = 1..n`, then `dF / dPhi_K`.
    pub d_self: Vec<f64>,
    /// Same for the neighbor; zero for boundary edges.
    pub d_other: Vec<f64>,
}

/// Double-upwind flux of species `i` out of the `K` side.
///
/// `du0` is `du_0 / du_j` (`-1`, or `0` for the linear model).
#[allow(clippy::too_many_arguments)]
pub fn upwind_flux(
    sys: &SpeciesSystem,
    i: usize,
    trans: f64,
    u_k: &[f64],
    u0_k: f64,
    phi_k: f64,
    u_l: &[f64],
    u0_l: f64,
    phi_l: f64,
    with_grad: bool,
) -> FluxEval {
    let n = u_k.len();
    let zb = sys.beta * sys.z[i];
    let dphi = phi_l - phi_k;
    let du = u_l[i] - u_k[i];
    let du0 = u0_l - u0_k;
    let k_max = u0_k >= u0_l;
    let u0s = if k_max { u0_k } else { u0_l };
    let hat_k = sys.z[i] * dphi >= 0.0;
    let u0hat = if hat_k { u0_k } else { u0_l };
    let v = du0 - u0hat * zb * dphi;
    let up_k = v >= 0.0;
    let uis = if up_k { u_k[i] } else { u_l[i] };
    let pre = -trans * sys.d[i];
    let value = pre * (u0s * du - uis * v);
    let mut d_self = vec![0.0; n + 1];
    let mut d_other = vec![0.0; n + 1];
    if with_grad {
        let s0 = if sys.linear_pnp { 0.0 } else { -1.0 };
        for j in 0..n {
            let dij = if i == j { 1.0 } else { 0.0 };
            // dependent quantities w.r.t. u_{j,K} and u_{j,L}
            let (du0s_k, du0s_l) = if k_max { (s0, 0.0) } else { (0.0, s0) };
            let (dhat_k, dhat_l) = if hat_k { (s0, 0.0) } else { (0.0, s0) };
            let dv_k = -s0 - dhat_k * zb * dphi;
            let dv_l = s0 - dhat_l * zb * dphi;
            let (duis_k, duis_l) = if up_k { (dij, 0.0) } else { (0.0, dij) };
            d_self[j] = pre * (du0s_k * du - u0s * dij - duis_k * v - uis * dv_k);
            d_other[j] = pre * (du0s_l * du + u0s * dij - duis_l * v - uis * dv_l);
        }
        // dV/dPhi_K = u0hat zb, dV/dPhi_L = -u0hat zb
        d_self[n] = pre * (-uis * u0hat * zb);
        d_other[n] = pre * (uis * u0hat * zb);
    }
    FluxEval { value, d_self, d_other }
}

/// Cell averages of a pointwise field by the edge-midpoint rule.
pub fn cell_average(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    (0..mesh.n_cells())
        .map(|k| {
            let p = mesh.triangle_points(k);
            let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            (f(mid(p[0], p[1])) + f(mid(p[1], p[2])) + f(mid(p[2], p[0]))) / 3.0
        })
        .collect()
}

struct EdgeData {
    u: Vec<f64>,
    u0: f64,
    phi: f64,
}

/// Precomputed cell and boundary data for one scenario.
pub struct Fvm<'a> {
    pub scenario: &'a Scenario,
    n: usize,
    ck: Vec<f64>,
    fk: Vec<f64>,
    /// Dirichlet data per edge (None for internal and Neumann edges).
    bdata: Vec<Option<EdgeData>>,
    gauge: bool,
}

impl<'a> Fvm<'a> {
    /// Fails with `InadmissibleMesh` when some `d_sigma <= 0`.
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let mesh = &scenario.mesh;
        let sys = &scenario.system;
        sys.validate()?;
        if let Some(e) = mesh.edges().iter().position(|e| !(e.dual.dist > 0.0)) {
            return Err(Error::InadmissibleMesh(e));
        }
        let n = sys.n();
        let ck = cell_average(mesh, |p| scenario.immobile.density(p));
        let fk = cell_average(mesh, |p| scenario.immobile.charge(p));
        let mut bdata = Vec::with_capacity(mesh.edges().len());
        for e in mesh.edges() {
            bdata.push(match e.kind {
                EdgeKind::Dirichlet(id) => {
                    let bv = scenario.boundary.get(&mesh.dirichlet_names()[id])?;
                    if bv.u.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, got: bv.u.len() });
                    }
                    let a = mesh.vertices()[e.vertices[0]];
                    let b = mesh.vertices()[e.vertices[1]];
                    let c = scenario.immobile.density([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    Some(EdgeData { u: bv.u.clone(), u0: sys.solvent(&bv.u, c), phi: bv.phi })
                }
                _ => None,
            });
        }
        let gauge = !mesh.has_dirichlet();
        Ok(Fvm { scenario, n, ck, fk, bdata, gauge })
    }

    pub fn system(&self) -> &SpeciesSystem {
        &self.scenario.system
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.scenario.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh().n_cells() * (self.n + 1)
    }

    /// Cell averages of the immobile density.
    pub fn cell_c(&self) -> &[f64] {
        &self.ck
    }

    pub fn cell_f(&self) -> &[f64] {
        &self.fk
    }

    pub fn solvent(&self, s: &CellState, k: usize) -> f64 {
        self.system().solvent(s.u(k), self.ck[k])
    }

    /// Boundary values on a Dirichlet edge.
    pub fn edge_boundary(&self, e: usize) -> Option<(&[f64], f64, f64)> {
        self.bdata[e].as_ref().map(|d| (d.u.as_slice(), d.u0, d.phi))
    }

    /// Fluxes `F_{i,K,sigma}` of all species out of `edges[e].cells.0`;
    /// zero on Neumann edges.
    pub fn edge_fluxes(&self, s: &CellState, e: usize) -> Vec<f64> {
        let n = self.n;
        let sys = self.system();
        let edge = &self.mesh().edges()[e];
        let k = edge.cells.0;
        let tr = edge.dual.transmissibility;
        let (uk, u0k, pk) = (s.u(k), self.solvent(s, k), s.phi(k));
        match (edge.cells.1, &self.bdata[e]) {
            (Some(l), _) => (0..n)
                .map(|i| upwind_flux(sys, i, tr, uk, u0k, pk, s.u(l), self.solvent(s, l), s.phi(l), false).value)
                .collect(),
            (None, Some(bd)) => {
                (0..n).map(|i| upwind_flux(sys, i, tr, uk, u0k, pk, &bd.u, bd.u0, bd.phi, false).value).collect()
            }
            (None, None) => vec![0.0; n],
        }
    }

    /// State from cell values of `u`; the potential solves the FV Poisson problem.
    pub fn state_from_cells(&self, u: &[f64], cache: &mut SolverCache) -> Result<CellState> {
        let n = self.n;
        let m = n + 1;
        let nc = self.mesh().n_cells();
        let mut x = vec![0.0; nc * m];
        for k in 0..nc {
            x[k * m..k * m + n].copy_from_slice(&u[k * n..(k + 1) * n]);
        }
        let mut s = CellState { n, x };
        self.poisson_update(&mut s, cache)?;
        Ok(s)
    }

    /// Initial cell averages of `u^I` with the matching potential.
    pub fn initial_state(&self, cache: &mut SolverCache) -> Result<CellState> {
        let n = self.n;
        let mesh = self.mesh();
        let mut u = vec![0.0; mesh.n_cells() * n];
        for i in 0..n {
            let avg = cell_average(mesh, |p| self.scenario.initial_u(p)[i]);
            for (k, a) in avg.into_iter().enumerate() {
                if a < 0.0 {
                    return Err(Error::NegativeConcentration(a));
                }
                u[k * n + i] = a;
            }
        }
        self.state_from_cells(&u, cache)
    }

    fn mask(&self, potential: bool) -> Vec<bool> {
        let m = self.n + 1;
        (0..self.dim()).map(|r| (r % m == self.n) == potential).collect()
    }

    /// Recomputes `Phi` for the current concentrations (one linear solve).
    pub fn poisson_update(&self, s: &mut CellState, cache: &mut SolverCache) -> Result<()> {
        let frozen = self.mask(false);
        let sys = StepSystem { fvm: self, old: None };
        newton::newton_solve(&sys, &mut s.x, Some(&frozen), &NewtonSettings::default(), cache)?;
        Ok(())
    }

    /// Residual and optional Jacobian. `old = Some((x_old, tau))` for a time
    /// step, `None` for the stationary equations.
    pub fn assemble(
        &self,
        x: &[f64],
        old: Option<(&[f64], f64)>,
        r: &mut [f64],
        mut jac: Option<&mut AssemblyBuffer>,
    ) -> Result<()> {
        let n = self.n;
        let m = n + 1;
        let sys = self.system();
        let mesh = self.mesh();
        if x.len() != self.dim() || r.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len().min(r.len()) });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NewtonDiverged { iterations: 0, residual: f64::NAN });
        }
        r.iter_mut().for_each(|v| *v = 0.0);
        let areas = mesh.areas();
        let u0 = |k: usize| sys.solvent(&x[k * m..k * m + n], self.ck[k]);

        for k in 0..mesh.n_cells() {
            let row = k * m;
            for i in 0..n {
                if let Some((xo, tau)) = old {
                    r[row + i] += areas[k] * (x[row + i] - xo[row + i]) / tau;
                }
            }
            let charge: f64 = (0..n).map(|i| sys.z[i] * x[row + i]).sum::<f64>() + self.fk[k];
            r[row + n] -= areas[k] * charge;
            if let Some(buf) = jac.as_deref_mut() {
                for i in 0..n {
                    if let Some((_, tau)) = old {
                        buf.push(row + i, row + i, areas[k] / tau);
                    }
                }
                for j in 0..n {
                    buf.push(row + n, row + j, -areas[k] * sys.z[j]);
                }
            }
        }

        for (e, edge) in mesh.edges().iter().enumerate() {
            let k = edge.cells.0;
            let tr = edge.dual.transmissibility;
            let uk = &x[k * m..k * m + n];
            let (u0k, pk) = (u0(k), x[k * m + n]);
            match (edge.cells.1, &self.bdata[e]) {
                (Some(l), _) => {
                    let ul = &x[l * m..l * m + n];
                    let (u0l, pl) = (u0(l), x[l * m + n]);
                    for i in 0..n {
                        let f = upwind_flux(sys, i, tr, uk, u0k, pk, ul, u0l, pl, jac.is_some());
                        r[k * m + i] += f.value;
                        r[l * m + i] -= f.value;
                        if let Some(buf) = jac.as_deref_mut() {
                            for j in 0..m {
                                buf.push(k * m + i, k * m + j, f.d_self[j]);
                                buf.push(k * m + i, l * m + j, f.d_other[j]);
                                buf.push(l * m + i, k * m + j, -f.d_self[j]);
                                buf.push(l * m + i, l * m + j, -f.d_other[j]);
                            }
                        }
                    }
                    let lp = sys.lambda2 * tr;
                    r[k * m + n] -= lp * (pl - pk);
                    r[l * m + n] -= lp * (pk - pl);
                    if let Some(buf) = jac.as_deref_mut() {
                        buf.push(k * m + n, k * m + n, lp);
                        buf.push(k * m + n, l * m + n, -lp);
                        buf.push(l * m + n, l * m + n, lp);
                        buf.push(l * m + n, k * m + n, -lp);
                    }
                }
                (None, Some(bd)) => {
                    for i in 0..n {
                        let f = upwind_flux(sys, i, tr, uk, u0k, pk, &bd.u, bd.u0, bd.phi, jac.is_some());
                        r[k * m + i] += f.value;
                        if let Some(buf) = jac.as_deref_mut() {
                            for j in 0..m {
                                buf.push(k * m + i, k * m + j, f.d_self[j]);
                            }
                        }
                    }
                    let lp = sys.lambda2 * tr;
                    r[k * m + n] -= lp * (bd.phi - pk);
                    if let Some(buf) = jac.as_deref_mut() {
                        buf.push(k * m + n, k * m + n, lp);
                    }
                }
                (None, None) => {}
            }
        }
        if self.gauge {
            r[n] = x[n];
        }
        if let Some(buf) = jac {
            if self.gauge {
                // Replace the Poisson row of cell 0 by Phi_0 = 0.
                let mut kept = AssemblyBuffer::new(buf.dim());
                buf.for_each(|i, j, v| {
                    if i != n {
                        kept.push(i, j, v);
                    }
                });
                kept.push(n, n, 1.0);
                *buf = kept;
            }
        }
        Ok(())
    }

    /// One implicit Euler step without step control.
    pub fn step(
        &self,
        old: &CellState,
        params: &FvParams,
        cache: &mut SolverCache,
    ) -> Result<(CellState, NewtonReport)> {
        if !(params.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", params.tau)));
        }
        let sys = StepSystem { fvm: self, old: Some((&old.x, params.tau)) };
        let mut x = old.x.clone();
        let rep = match params.mode {
            FvMode::FullyImplicit => newton::newton_solve(&sys, &mut x, None, &params.newton, cache)?,
            FvMode::SemiImplicit => {
                let frozen = self.mask(true);
                let a = newton::newton_solve(&sys, &mut x, Some(&frozen), &params.newton, cache)?;
                let frozen = self.mask(false);
                let b = newton::newton_solve(&sys, &mut x, Some(&frozen), &params.newton, cache)?;
                NewtonReport { iterations: a.iterations + b.iterations, residual: a.residual.max(b.residual) }
            }
        };
        Ok((CellState { n: self.n, x }, rep))
    }

    /// One interval of length `params.tau` with step halving on failure.
    pub fn advance(
        &self,
        state: &mut CellState,
        params: &FvParams,
        time: f64,
        cache: &mut SolverCache,
    ) -> Result<usize> {
        newton::step_with_control(state, params.tau, time, params.max_retries, &mut |s, tau| {
            let p = FvParams { tau, ..*params };
            let (next, rep) = self.step(s, &p, cache)?;
            *s = next;
            Ok(rep.iterations)
        })
    }

    /// Stationary state by pseudo-time continuation, closed by a Newton
    /// solve of the stationary equations.
    pub fn solve_stationary(&self, start: &CellState, params: &FvParams, cache: &mut SolverCache) -> Result<CellState> {
        let mut state = start.clone();
        let mut tau = params.tau;
        let mut time = 0.0;
        let n = self.n;
        let m = n + 1;
        for _ in 0..400 {
            let before = state.x.clone();
            let p = FvParams { tau, mode: FvMode::FullyImplicit, ..*params };
            self.advance(&mut state, &p, time, cache)?;
            time += tau;
            let change =
                (0..state.x.len()).filter(|r| r % m != n).fold(0.0f64, |a, r| a.max((state.x[r] - before[r]).abs()));
            if change / tau <= 1e-8 {
                break;
            }
            tau = (2.0 * tau).min(1e8);
        }
        let sys = StepSystem { fvm: self, old: None };
        newton::newton_solve(&sys, &mut state.x, None, &params.newton, cache)?;
        Ok(state)
    }

    /// Per-species total mass `sum_K m(K) u_{i,K}`.
    pub fn mass(&self, s: &CellState) -> Vec<f64> {
        let areas = self.mesh().areas();
        (0..self.n).map(|i| (0..s.n_cells()).map(|k| areas[k] * s.u(k)[i]).sum()).collect()
    }

    /// `sum_K m(K) h(u_K | u_ref,K) + beta lambda^2/2 sum_sigma tau_sigma |D(Phi - Phi_ref)|^2`.
    ///
    /// Concentrations down to `-1e-12` are treated as zero.
    pub fn entropy(&self, s: &CellState, reference: &CellState) -> Result<f64> {
        let sys = self.system();
        let mesh = self.mesh();
        let mut h = 0.0;
        let clamp = |u: &[f64]| -> Result<Vec<f64>> {
            u.iter().map(|&v| if v >= -1e-12 { Ok(v.max(0.0)) } else { Err(Error::NegativeConcentration(v)) }).collect()
        };
        for k in 0..mesh.n_cells() {
            let u = clamp(s.u(k))?;
            h += mesh.areas()[k] * sys.entropy_at(&u, self.ck[k], reference.u(k), self.ck[k])?;
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            let k = edge.cells.0;
            let dk = s.phi(k) - reference.phi(k);
            let d = match (edge.cells.1, &self.bdata[e]) {
                (Some(l), _) => (s.phi(l) - reference.phi(l)) - dk,
                (None, Some(_)) => -dk,
                (None, None) => 0.0,
            };
            h += 0.5 * sys.beta * sys.lambda2 * edge.dual.transmissibility * d * d;
        }
        Ok(h)
    }
}

/// Adapter exposing one time step (or the stationary problem) to Newton.
pub struct StepSystem<'f, 'a> {
    pub fvm: &'f Fvm<'a>,
    pub old: Option<(&'f [f64], f64)>,
}

impl NonlinearSystem for StepSystem<'_, '_> {
    fn dim(&self) -> usize {
        self.fvm.dim()
    }
    fn assemble(&self, x: &[f64], r: &mut [f64], jac: Option<&mut AssemblyBuffer>) -> Result<()> {
        self.fvm.assemble(x, self.old, r, jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ImmobileProfile, Lifting};
    use crate::scenarios::calcium_channel;

    fn one_species() -> SpeciesSystem {
        SpeciesSystem::new(vec![1.0], vec![1.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn hand_computed_flux() {
        // u0_s = 0.9, u0hat = 0.8 (z dPhi >= 0), V = 0.1 - 0.8 = -0.7 so the
        // upwind value is u_L = 0.1: F = -(0.9 (-0.1) - 0.1 (-0.7)) = 0.02.
        let f = upwind_flux(&one_species(), 0, 1.0, &[0.2], 0.8, 0.0, &[0.1], 0.9, 1.0, false);
        assert!((f.value - 0.02).abs() < 1e-15);
        let f = upwind_flux(&one_species(), 0, 3.0, &[0.2], 0.8, 0.0, &[0.1], 0.9, 1.0, false);
        assert!((f.value - 0.06).abs() < 1e-15);
    }

    #[test]
    fn flux_is_antisymmetric() {
        let sys = SpeciesSystem::new(vec![1.0, 2.0], vec![1.0, -2.0], 1.5, 1.0).unwrap();
        let (a, b) = ([0.2, 0.1], [0.05, 0.3]);
        for (pk, pl) in [(0.0, 0.7), (0.3, -0.4), (0.2, 0.2)] {
            for i in 0..2 {
                let fk = upwind_flux(&sys, i, 1.3, &a, 0.7, pk, &b, 0.65, pl, false).value;
                let fl = upwind_flux(&sys, i, 1.3, &b, 0.65, pl, &a, 0.7, pk, false).value;
                assert_eq!(fk, -fl);
            }
        }
    }

    #[test]
    fn no_flux_between_equal_states() {
        let f = upwind_flux(&one_species(), 0, 2.0, &[0.3], 0.7, 0.4, &[0.3], 0.7, 0.4, true);
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn discrete_gradient_vanishes_on_neumann_edges() {
        assert_eq!(discrete_gradient(1.0, Some(3.5)), 2.5);
        assert_eq!(discrete_gradient(1.0, None), 0.0);
    }

    #[test]
    fn cell_average_is_exact_for_quadratics() {
        let s = calcium_channel(0).unwrap();
        let avg = cell_average(&s.mesh, |p| p[0] * p[0] + p[0] * p[1]);
        let total: f64 = avg.iter().zip(s.mesh.areas()).map(|(a, m)| a * m).sum();
        // Exact integral split by element with a high-order rule.
        let mut exact = 0.0;
        for k in 0..s.mesh.n_cells() {
            let p = s.mesh.triangle_points(k);
            let f = |q: Point| q[0] * q[0] + q[0] * q[1];
            let m = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            exact += s.mesh.areas()[k] / 3.0 * (f(m(p[0], p[1])) + f(m(p[1], p[2])) + f(m(p[2], p[0])));
        }
        assert!((total - exact).abs() < 1e-14);
    }

    /// Equal neutral baths and no immobile ions: the uniform state is stationary.
    fn equilibrium() -> Scenario {
        let mut s = calcium_channel(0).unwrap();
        let bath = s.boundary.get("left").unwrap().clone();
        s.immobile = ImmobileProfile::none();
        s.boundary.set("right", bath.clone());
        s.lifting = Lifting::Constant(bath);
        s
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let s = equilibrium();
        let fvm = Fvm::new(&s).unwrap();
        let mut cache = SolverCache::new();
        let st = fvm.initial_state(&mut cache).unwrap();
        let mut r = vec![0.0; fvm.dim()];
        fvm.assemble(&st.x, Some((&st.x, s.tau)), &mut r, None).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let params = FvParams::from_scenario(&s, FvMode::FullyImplicit);
        let (next, rep) = fvm.step(&st, &params, &mut cache).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(next, st);
    }

    #[test]
    fn semi_implicit_step_conserves_mass_without_dirichlet_data() {
        let mut s = equilibrium();
        let tags: Vec<_> =
            s.mesh.boundary_tags().into_iter().map(|(a, b, _)| (a, b, crate::mesh::BoundaryTag::Neumann)).collect();
        s.mesh = TriMesh::from_arrays(s.mesh.vertices().to_vec(), s.mesh.triangles().to_vec(), &tags, s.mesh.policy())
            .unwrap();
        s.initial = crate::scenarios::InitialProfile::Field(std::sync::Arc::new(|p: Point| {
            vec![0.002 + 0.001 * p[0], 0.002, 0.006 - 0.001 * p[0]]
        }));
        let fvm = Fvm::new(&s).unwrap();
        let mut cache = SolverCache::new();
        let mut st = fvm.initial_state(&mut cache).unwrap();
        let m0 = fvm.mass(&st);
        let params = FvParams::from_scenario(&s, FvMode::SemiImplicit);
        for k in 0..5 {
            fvm.advance(&mut st, &params, k as f64 * s.tau, &mut cache).unwrap();
        }
        for (a, b) in fvm.mass(&st).iter().zip(&m0) {
            assert!(((a - b) / b).abs() < 1e-12);
        }
        assert_eq!(st.phi(0), 0.0);
    }

    #[test]
    fn linear_model_keeps_unit_solvent() {
        let mut s = equilibrium();
        s.system = s.system.clone().with_linear_pnp(true);
        let fvm = Fvm::new(&s).unwrap();
        let mut cache = SolverCache::new();
        let st = fvm.initial_state(&mut cache).unwrap();
        assert!((0..st.n_cells()).all(|k| fvm.solvent(&st, k) == 1.0));
    }
}
