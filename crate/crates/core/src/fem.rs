//! Implicit Euler P1 finite elements in entropy variables.
//!
//! Unknowns are nodal `(w_1..w_n, Phi)` stored interleaved, vertex-major.
//! Nonlinear coefficients, the mass term and the regularization are
//! integrated with the three-point edge-midpoint rule; gradients are
//! elementwise constant. Dirichlet vertices are pinned to the lifted
//! boundary values `(w_bar, Phi_bar)`.

use crate::linsys::{self, AssemblyBuffer};
use crate::mesh::{P1Element, Point, TriMesh};
use crate::model::{self, SpeciesSystem};
use crate::newton::{self, NewtonReport, NewtonSettings, NonlinearSystem, SolverCache};
use crate::scenarios::Scenario;
use crate::{Error, Result};

/// Default regularization parameter.
pub const DEFAULT_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FemParams {
    pub tau: f64,
    pub eps: f64,
    pub newton: NewtonSettings,
    /// Step halvings allowed by the time-step controller.
    pub max_retries: usize,
}

impl FemParams {
    pub fn from_scenario(s: &Scenario) -> Self {
        FemParams { tau: s.tau, eps: s.eps, newton: s.newton, max_retries: s.max_retries }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be nonnegative, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Nodal entropy variables and potential, interleaved per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalState {
    pub n: usize,
    pub x: Vec<f64>,
}

impl NodalState {
    pub fn n_vertices(&self) -> usize {
        self.x.len() / (self.n + 1)
    }
    pub fn w(&self, v: usize) -> &[f64] {
        let m = self.n + 1;
        &self.x[v * m..v * m + self.n]
    }
    pub fn phi(&self, v: usize) -> f64 {
        self.x[v * (self.n + 1) + self.n]
    }
    pub fn phi_vec(&self) -> Vec<f64> {
        (0..self.n_vertices()).map(|v| self.phi(v)).collect()
    }
}

/// The operator `I_h`: sampling at the vertices.
pub fn interpolate_nodal(f: impl Fn(Point) -> f64, mesh: &TriMesh) -> Vec<f64> {
    mesh.vertices().iter().map(|&p| f(p)).collect()
}

/// Basis value of local vertex `a` at the midpoint of local edge `q`.
#[inline]
fn basis(q: usize, a: usize) -> f64 {
    if a == q || a == (q + 1) % 3 {
        0.5
    } else {
        0.0
    }
}

fn midpoints(p: [Point; 3]) -> [Point; 3] {
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    [mid(p[0], p[1]), mid(p[1], p[2]), mid(p[2], p[0])]
}

/// Precomputed element data for one scenario.
pub struct Fem<'a> {
    pub scenario: &'a Scenario,
    n: usize,
    elems: Vec<P1Element>,
    /// Immobile density and background charge at quadrature points.
    cq: Vec<[f64; 3]>,
    fq: Vec<[f64; 3]>,
    pinned: Vec<bool>,
    /// Nodal `(w_bar, Phi_bar)` in the unknown layout.
    bar: Vec<f64>,
}

impl<'a> Fem<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let mesh = &scenario.mesh;
        let sys = &scenario.system;
        sys.validate()?;
        let n = sys.n();
        let m = n + 1;
        let elems = mesh.p1_reference_data();
        let mut cq = Vec::with_capacity(mesh.n_cells());
        let mut fq = Vec::with_capacity(mesh.n_cells());
        for k in 0..mesh.n_cells() {
            let qp = midpoints(mesh.triangle_points(k));
            cq.push(qp.map(|p| scenario.immobile.density(p)));
            fq.push(qp.map(|p| scenario.immobile.charge(p)));
        }
        let mut pinned = vec![false; mesh.n_vertices()];
        let mut bar = vec![0.0; mesh.n_vertices() * m];
        for (v, &p) in mesh.vertices().iter().enumerate() {
            let c = scenario.immobile.density(p);
            let val = match mesh.vertex_dirichlet(v) {
                Some(id) => {
                    pinned[v] = true;
                    scenario.boundary.get(&mesh.dirichlet_names()[id])?.clone()
                }
                None => scenario.lifting.eval(p),
            };
            if val.u.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: val.u.len() });
            }
            let w = model::to_entropy(sys, &val.u, val.phi, c)?;
            bar[v * m..v * m + n].copy_from_slice(&w);
            bar[v * m + n] = val.phi;
        }
        Ok(Fem { scenario, n, elems, cq, fq, pinned, bar })
    }

    pub fn system(&self) -> &SpeciesSystem {
        &self.scenario.system
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.scenario.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh().n_vertices() * (self.n + 1)
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pinned[v]
    }

    /// The lifted boundary data `(w_bar_h, Phi_bar_h)` as a state.
    pub fn lifted(&self) -> NodalState {
        NodalState { n: self.n, x: self.bar.clone() }
    }

    /// Builds a state from nodal concentrations and potential.
    pub fn state_from_nodal(&self, u: &[f64], phi: &[f64]) -> Result<NodalState> {
        let n = self.n;
        let m = n + 1;
        let mesh = self.mesh();
        let mut x = vec![0.0; self.dim()];
        for v in 0..mesh.n_vertices() {
            let c = self.scenario.immobile.density(mesh.vertices()[v]);
            let w = model::to_entropy(self.system(), &u[v * n..(v + 1) * n], phi[v], c)?;
            x[v * m..v * m + n].copy_from_slice(&w);
            x[v * m + n] = phi[v];
        }
        self.pin(&mut x);
        Ok(NodalState { n, x })
    }

    fn pin(&self, x: &mut [f64]) {
        let m = self.n + 1;
        for v in 0..self.pinned.len() {
            if self.pinned[v] {
                x[v * m..(v + 1) * m].copy_from_slice(&self.bar[v * m..(v + 1) * m]);
            }
        }
    }

    /// Initial state: nodal `u^I`, `Phi^0` from the linear Poisson problem and
    /// `w^0 = I_h log(u^I / u_0^I) + beta z Phi^0`.
    pub fn initial_state(&self) -> Result<NodalState> {
        let mesh = self.mesh();
        let n = self.n;
        let mut u = Vec::with_capacity(mesh.n_vertices() * n);
        for (v, &p) in mesh.vertices().iter().enumerate() {
            let ui = self.scenario.initial_u(p);
            let u0 = self.system().solvent(&ui, self.scenario.immobile.density(p));
            if ui.len() != n || ui.iter().any(|x| !(*x > 0.0)) || !(u0 > 0.0) {
                return Err(Error::NonpositiveInitialData { vertex: v });
            }
            u.extend(ui);
        }
        let phi = self.poisson_solve(&u)?;
        self.state_from_nodal(&u, &phi)
    }

    /// Linear FE Poisson problem with the P1 interpolant of `u` as charge.
    ///
    /// Without Dirichlet vertices the potential is fixed to zero at vertex 0.
    pub fn poisson_solve(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mesh = self.mesh();
        let n = self.n;
        let sys = self.system();
        let nv = mesh.n_vertices();
        let gauge = !self.pinned.iter().any(|&p| p);
        let fixed = |v: usize| self.pinned[v] || (gauge && v == 0);
        let mut buf = AssemblyBuffer::with_capacity(nv, 9 * mesh.n_cells() + nv);
        let mut rhs = vec![0.0; nv];
        for (k, t) in mesh.triangles().iter().enumerate() {
            let e = &self.elems[k];
            let wt = e.area / 3.0;
            for q in 0..3 {
                let (a, b) = (t[q], t[(q + 1) % 3]);
                let charge: f64 =
                    (0..n).map(|i| sys.z[i] * 0.5 * (u[a * n + i] + u[b * n + i])).sum::<f64>() + self.fq[k][q];
                for al in 0..3 {
                    rhs[t[al]] += wt * basis(q, al) * charge;
                }
            }
            for al in 0..3 {
                if fixed(t[al]) {
                    continue;
                }
                for be in 0..3 {
                    let g = e.grads[al][0] * e.grads[be][0] + e.grads[al][1] * e.grads[be][1];
                    buf.push(t[al], t[be], sys.lambda2 * e.area * g);
                }
            }
        }
        for v in 0..nv {
            if fixed(v) {
                buf.push(v, v, 1.0);
                rhs[v] = if self.pinned[v] { self.bar[v * (n + 1) + n] } else { 0.0 };
            }
        }
        linsys::solve(&buf.finalize()?, &rhs)
    }

    /// Concentrations `u_i` at the three quadrature points of every triangle,
    /// laid out as `(cell * 3 + q) * n + i`.
    pub fn quadrature_u(&self, s: &NodalState) -> Vec<f64> {
        let n = self.n;
        let m = n + 1;
        let mut out = vec![0.0; self.mesh().n_cells() * 3 * n];
        let mut wq = vec![0.0; n];
        for (k, t) in self.mesh().triangles().iter().enumerate() {
            for q in 0..3 {
                let (a, b) = (t[q], t[(q + 1) % 3]);
                for i in 0..n {
                    wq[i] = 0.5 * (s.x[a * m + i] + s.x[b * m + i]);
                }
                let phq = 0.5 * (s.x[a * m + n] + s.x[b * m + n]);
                let o = (k * 3 + q) * n;
                model::from_entropy_into(self.system(), &wq, phq, self.cq[k][q], &mut out[o..o + n]);
            }
        }
        out
    }

    /// Nodal concentrations `u_i(w, Phi)` laid out `v * n + i`, and `u_0` per vertex.
    pub fn nodal_u(&self, s: &NodalState) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mesh = self.mesh();
        let mut u = vec![0.0; mesh.n_vertices() * n];
        let mut u0 = vec![0.0; mesh.n_vertices()];
        for v in 0..mesh.n_vertices() {
            let c = self.scenario.immobile.density(mesh.vertices()[v]);
            u0[v] = model::from_entropy_into(self.system(), s.w(v), s.phi(v), c, &mut u[v * n..(v + 1) * n]);
        }
        (u, u0)
    }

    /// Immobile density at quadrature points, per cell.
    pub fn quadrature_c(&self) -> &[[f64; 3]] {
        &self.cq
    }

    pub fn elements(&self) -> &[P1Element] {
        &self.elems
    }

    /// Per-species integral of `u_i` under the scheme's quadrature.
    pub fn mass(&self, s: &NodalState) -> Vec<f64> {
        let n = self.n;
        let uq = self.quadrature_u(s);
        let mut mass = vec![0.0; n];
        for (k, e) in self.elems.iter().enumerate() {
            for q in 0..3 {
                for i in 0..n {
                    mass[i] += e.area / 3.0 * uq[(k * 3 + q) * n + i];
                }
            }
        }
        mass
    }

    /// Discrete entropy of `s` relative to `reference`, integrated with the
    /// scheme's quadrature, plus `beta lambda^2 / 2 |grad(Phi - Phi_ref)|^2`.
    pub fn entropy(&self, s: &NodalState, reference: &NodalState) -> Result<f64> {
        let n = self.n;
        let sys = self.system();
        let uq = self.quadrature_u(s);
        let rq = self.quadrature_u(reference);
        let mut h = 0.0;
        for (k, (e, t)) in self.elems.iter().zip(self.mesh().triangles()).enumerate() {
            for q in 0..3 {
                let o = (k * 3 + q) * n;
                let c = self.cq[k][q];
                h += e.area / 3.0 * sys.entropy_at(&uq[o..o + n], c, &rq[o..o + n], c)?;
            }
            let mut g = [0.0; 2];
            for a in 0..3 {
                let d = s.phi(t[a]) - reference.phi(t[a]);
                g[0] += d * e.grads[a][0];
                g[1] += d * e.grads[a][1];
            }
            h += 0.5 * sys.beta * sys.lambda2 * e.area * (g[0] * g[0] + g[1] * g[1]);
        }
        Ok(h)
    }

    /// Residual and optional Jacobian. `old` carries `u^{k-1}` at quadrature
    /// points and `tau`; `None` gives the stationary equations.
    pub fn assemble(
        &self,
        x: &[f64],
        old: Option<(&[f64], f64)>,
        eps: f64,
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
        r.iter_mut().for_each(|v| *v = 0.0);
        let mut wq = vec![0.0; n];
        let mut wbq = vec![0.0; n];
        let mut u = vec![0.0; 3 * n];
        let mut u0 = [0.0; 3];
        let mut du_dw = vec![0.0; 3 * n * n];
        let mut du_dphi = vec![0.0; 3 * n];
        let mut du0_dw = vec![0.0; 3 * n];
        let mut du0_dphi = [0.0; 3];
        let mut mob = vec![0.0; n];
        // d(D_i u_i u_0 wt)/d(component j at q), j = n is Phi.
        let mut dmob = vec![0.0; 3 * n * m];
        let mut g = vec![0.0; 3 * n];
        let mut local = vec![0.0; 9 * m * m];
        let inv_tau = old.map_or(0.0, |(_, t)| 1.0 / t);
        // Without Dirichlet vertices the Poisson row of vertex 0 becomes Phi_0 = 0.
        let gauge = !self.pinned.iter().any(|&p| p);
        for (k, t) in mesh.triangles().iter().enumerate() {
            let e = &self.elems[k];
            let wt = e.area / 3.0;
            for q in 0..3 {
                let (a, b) = (t[q], t[(q + 1) % 3]);
                for i in 0..n {
                    wq[i] = 0.5 * (x[a * m + i] + x[b * m + i]);
                }
                let phq = 0.5 * (x[a * m + n] + x[b * m + n]);
                let c = self.cq[k][q];
                u0[q] = model::from_entropy_into(sys, &wq, phq, c, &mut u[q * n..(q + 1) * n]);
                let (mut d0p, uq) = (0.0, &u[q * n..(q + 1) * n]);
                model::jacobian_into(
                    sys,
                    uq,
                    u0[q],
                    c,
                    &mut du_dw[q * n * n..(q + 1) * n * n],
                    &mut du_dphi[q * n..(q + 1) * n],
                    &mut du0_dw[q * n..(q + 1) * n],
                    &mut d0p,
                );
                du0_dphi[q] = d0p;
            }
            if u.iter().chain(&u0).any(|v| !v.is_finite()) {
                return Err(Error::NewtonDiverged { iterations: 0, residual: f64::NAN });
            }
            for i in 0..n {
                let mut s = 0.0;
                for q in 0..3 {
                    let ui = u[q * n + i];
                    s += wt * ui * u0[q];
                    for j in 0..n {
                        dmob[(q * n + i) * m + j] =
                            sys.d[i] * wt * (du_dw[q * n * n + i * n + j] * u0[q] + ui * du0_dw[q * n + j]);
                    }
                    dmob[(q * n + i) * m + n] = sys.d[i] * wt * (du_dphi[q * n + i] * u0[q] + ui * du0_dphi[q]);
                }
                mob[i] = sys.d[i] * s;
                let mut gw = [0.0; 2];
                for b in 0..3 {
                    gw[0] += x[t[b] * m + i] * e.grads[b][0];
                    gw[1] += x[t[b] * m + i] * e.grads[b][1];
                }
                for al in 0..3 {
                    g[al * n + i] = gw[0] * e.grads[al][0] + gw[1] * e.grads[al][1];
                }
            }
            let gg = |a: usize, b: usize| e.grads[a][0] * e.grads[b][0] + e.grads[a][1] * e.grads[b][1];

            for al in 0..3 {
                let row = t[al] * m;
                for q in 0..3 {
                    let ph = basis(q, al);
                    if ph == 0.0 {
                        continue;
                    }
                    let (a, b) = (t[q], t[(q + 1) % 3]);
                    for i in 0..n {
                        wbq[i] = 0.5 * (self.bar[a * m + i] + self.bar[b * m + i]);
                        let wqi = 0.5 * (x[a * m + i] + x[b * m + i]);
                        let mut v = eps * (wqi - wbq[i]);
                        if let Some((uold, _)) = old {
                            v += (u[q * n + i] - uold[(k * 3 + q) * n + i]) * inv_tau;
                        }
                        r[row + i] += wt * ph * v;
                    }
                    let charge: f64 = (0..n).map(|i| sys.z[i] * u[q * n + i]).sum::<f64>() + self.fq[k][q];
                    r[row + n] -= wt * ph * charge;
                }
                for i in 0..n {
                    r[row + i] += mob[i] * g[al * n + i];
                }
                let mut lap = 0.0;
                for be in 0..3 {
                    lap += gg(al, be) * x[t[be] * m + n];
                }
                r[row + n] += sys.lambda2 * e.area * lap;
            }

            let Some(buf) = jac.as_deref_mut() else { continue };
            local.iter_mut().for_each(|v| *v = 0.0);
            let lidx = |al: usize, ci: usize, be: usize, cj: usize| ((al * m + ci) * 3 + be) * m + cj;
            for al in 0..3 {
                for be in 0..3 {
                    let gab = gg(al, be);
                    for q in 0..3 {
                        let pp = basis(q, al) * basis(q, be) * wt;
                        let pb = basis(q, be);
                        for i in 0..n {
                            for j in 0..n {
                                let mut v = pp * du_dw[q * n * n + i * n + j] * inv_tau;
                                if i == j {
                                    v += pp * eps;
                                }
                                v += pb * dmob[(q * n + i) * m + j] * g[al * n + i];
                                local[lidx(al, i, be, j)] += v;
                            }
                            local[lidx(al, i, be, n)] +=
                                pp * du_dphi[q * n + i] * inv_tau + pb * dmob[(q * n + i) * m + n] * g[al * n + i];
                        }
                        for j in 0..n {
                            let s: f64 = (0..n).map(|l| sys.z[l] * du_dw[q * n * n + l * n + j]).sum();
                            local[lidx(al, n, be, j)] -= pp * s;
                        }
                        let s: f64 = (0..n).map(|l| sys.z[l] * du_dphi[q * n + l]).sum();
                        local[lidx(al, n, be, n)] -= pp * s;
                    }
                    for i in 0..n {
                        local[lidx(al, i, be, i)] += mob[i] * gab;
                    }
                    local[lidx(al, n, be, n)] += sys.lambda2 * e.area * gab;
                }
            }
            for al in 0..3 {
                if self.pinned[t[al]] {
                    continue;
                }
                for ci in 0..m {
                    if gauge && t[al] == 0 && ci == n {
                        continue;
                    }
                    for be in 0..3 {
                        for cj in 0..m {
                            buf.push(t[al] * m + ci, t[be] * m + cj, local[lidx(al, ci, be, cj)]);
                        }
                    }
                }
            }
        }
        for v in 0..self.pinned.len() {
            if self.pinned[v] {
                for c in 0..m {
                    r[v * m + c] = x[v * m + c] - self.bar[v * m + c];
                }
            }
        }
        if gauge {
            r[n] = x[n];
        }
        if let Some(buf) = jac {
            for v in 0..self.pinned.len() {
                if self.pinned[v] {
                    for c in 0..m {
                        buf.push(v * m + c, v * m + c, 1.0);
                    }
                }
            }
            if gauge {
                buf.push(n, n, 1.0);
            }
        }
        Ok(())
    }

    /// One implicit Euler step of length `tau` without step control.
    pub fn step(
        &self,
        old: &NodalState,
        params: &FemParams,
        cache: &mut SolverCache,
    ) -> Result<(NodalState, NewtonReport)> {
        params.validate()?;
        let uold = self.quadrature_u(old);
        let sys = StepSystem { fem: self, old: Some((&uold, params.tau)), eps: params.eps };
        let mut x = old.x.clone();
        let rep = newton::newton_solve(&sys, &mut x, None, &params.newton, cache)?;
        Ok((NodalState { n: self.n, x }, rep))
    }

    /// One interval of length `params.tau`, halving on Newton failure.
    /// Returns the Newton iteration count.
    pub fn advance(
        &self,
        state: &mut NodalState,
        params: &FemParams,
        time: f64,
        cache: &mut SolverCache,
    ) -> Result<usize> {
        newton::step_with_control(state, params.tau, time, params.max_retries, &mut |s, tau| {
            let p = FemParams { tau, ..*params };
            let (next, rep) = self.step(s, &p, cache)?;
            *s = next;
            Ok(rep.iterations)
        })
    }

    /// Stationary state by pseudo-time continuation with doubling `tau`,
    /// closed by a Newton solve of the stationary equations.
    pub fn solve_stationary(
        &self,
        start: &NodalState,
        params: &FemParams,
        cache: &mut SolverCache,
    ) -> Result<NodalState> {
        let mut state = start.clone();
        let mut tau = params.tau;
        let mut time = 0.0;
        for _ in 0..400 {
            let before = self.nodal_u(&state).0;
            let p = FemParams { tau, ..*params };
            self.advance(&mut state, &p, time, cache)?;
            time += tau;
            let after = self.nodal_u(&state).0;
            let change = after.iter().zip(&before).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if change / tau <= 1e-8 {
                break;
            }
            tau = (2.0 * tau).min(1e8);
        }
        let sys = StepSystem { fem: self, old: None, eps: params.eps };
        newton::newton_solve(&sys, &mut state.x, None, &params.newton, cache)?;
        Ok(state)
    }
}

/// Adapter exposing one time step (or the stationary problem) to Newton.
pub struct StepSystem<'f, 'a> {
    pub fem: &'f Fem<'a>,
    pub old: Option<(&'f [f64], f64)>,
    pub eps: f64,
}

impl NonlinearSystem for StepSystem<'_, '_> {
    fn dim(&self) -> usize {
        self.fem.dim()
    }
    fn assemble(&self, x: &[f64], r: &mut [f64], jac: Option<&mut AssemblyBuffer>) -> Result<()> {
        self.fem.assemble(x, self.old, self.eps, r, jac)
    }
}
