//! Norms, projections, entropies, currents and convergence orders.

use serde::{Deserialize, Serialize};

use crate::fem::{Fem, NodalState};
use crate::fvm::{CellState, Fvm};
use crate::mesh::TriMesh;
use crate::model;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    LInf,
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::MeshMismatch(format!("{what}: {a} vs {b} values")));
    }
    Ok(())
}

/// Weighted discrete norm of `a - b`. For `L1` the weights are the cell
/// areas (or lumped nodal areas); `LInf` ignores them.
pub fn norm(a: &[f64], b: &[f64], weights: &[f64], which: Norm) -> Result<f64> {
    check_len(a.len(), b.len(), "norm operands")?;
    check_len(a.len(), weights.len(), "norm weights")?;
    let it = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    Ok(match which {
        Norm::L1 => it.zip(weights).map(|(d, w)| d * w).sum(),
        Norm::LInf => it.fold(0.0, f64::max),
    })
}

/// Lumped nodal areas `sum_{K ni v} m(K) / 3`.
pub fn nodal_weights(mesh: &TriMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_vertices()];
    for (t, a) in mesh.triangles().iter().zip(mesh.areas()) {
        for &v in t {
            w[v] += a / 3.0;
        }
    }
    w
}

/// Cell means of the nodal concentrations and potential: the cell-constant
/// projection of the P1 interpolants.
pub fn project_fe_to_fv(fem: &Fem, s: &NodalState) -> Result<CellState> {
    let mesh = fem.mesh();
    let n = s.n;
    check_len(s.n_vertices(), mesh.n_vertices(), "finite-element state")?;
    let (u, _) = fem.nodal_u(s);
    let m = n + 1;
    let mut x = vec![0.0; mesh.n_cells() * m];
    for (k, t) in mesh.triangles().iter().enumerate() {
        for &v in t {
            for i in 0..n {
                x[k * m + i] += u[v * n + i] / 3.0;
            }
            x[k * m + n] += s.phi(v) / 3.0;
        }
    }
    Ok(CellState { n, x })
}

/// Averages cell values over the `4^levels` children produced by
/// `levels` regular refinements. `stride` values are stored per cell.
pub fn restrict_cells(fine: &[f64], stride: usize, levels: usize) -> Vec<f64> {
    let mut cur = fine.to_vec();
    for _ in 0..levels {
        let nc = cur.len() / stride / 4;
        let mut next = vec![0.0; nc * stride];
        for k in 0..nc {
            for c in 0..4 {
                for j in 0..stride {
                    next[k * stride + j] += 0.25 * cur[(4 * k + c) * stride + j];
                }
            }
        }
        cur = next;
    }
    cur
}

pub fn restrict_state(fine: &CellState, levels: usize) -> CellState {
    CellState { n: fine.n, x: restrict_cells(&fine.x, fine.n + 1, levels) }
}

/// FE relative entropy with respect to `steady`.
pub fn fe_relative_entropy(fem: &Fem, s: &NodalState, steady: &NodalState) -> Result<f64> {
    check_len(s.x.len(), fem.dim(), "state")?;
    check_len(steady.x.len(), fem.dim(), "steady state")?;
    fem.entropy(s, steady)
}

/// FV relative entropy with respect to `steady`.
pub fn fv_relative_entropy(fvm: &Fvm, s: &CellState, steady: &CellState) -> Result<f64> {
    check_len(s.x.len(), fvm.dim(), "state")?;
    check_len(steady.x.len(), fvm.dim(), "steady state")?;
    fvm.entropy(s, steady)
}

/// Intersection of the line `x = x0` with a triangle: endpoints and whether
/// the segment is a mesh edge (then shared with the neighbor).
fn cut_segment(p: [[f64; 2]; 3], x0: f64, tol: f64) -> Option<([f64; 2], [f64; 2], bool)> {
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(3);
    let mut on_vertex = 0;
    for a in 0..3 {
        let b = (a + 1) % 3;
        let (da, db) = (p[a][0] - x0, p[b][0] - x0);
        if da.abs() <= tol {
            pts.push([x0, p[a][1]]);
            on_vertex += 1;
        } else if db.abs() > tol && da * db < 0.0 {
            let t = da / (da - db);
            pts.push([x0, p[a][1] + t * (p[b][1] - p[a][1])]);
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), q| (l.min(q[1]), h.max(q[1])));
    if hi - lo <= tol {
        return None;
    }
    Some(([x0, lo], [x0, hi], on_vertex == 2))
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
const GAUSS3: [(f64, f64); 3] =
    [(0.112_701_665_379_258_31, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.887_298_334_620_741_7, 5.0 / 18.0)];

/// `I = -sum_i z_i int_A F_i . e_x ds` along `x = x0` with
/// `F_i = -D_i u_i u_0 grad w_i`, by three-point Gauss quadrature on each
/// triangle's piece of the line.
pub fn fe_current(fem: &Fem, s: &NodalState, x0: f64) -> Result<f64> {
    let mesh = fem.mesh();
    let sys = fem.system();
    let n = s.n;
    check_len(s.n_vertices(), mesh.n_vertices(), "finite-element state")?;
    let tol = 1e-12 * mesh.diameter().max(1.0);
    let mut current = 0.0;
    let mut length = 0.0;
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    for (k, t) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(k);
        let Some((a, b, shared)) = cut_segment(p, x0, tol) else { continue };
        let weight = if shared { 0.5 } else { 1.0 };
        let e = &fem.elements()[k];
        let len = b[1] - a[1];
        length += weight * len;
        // Barycentric coordinates of a point from the P1 basis gradients.
        let lam = |q: [f64; 2]| -> [f64; 3] {
            let mut l = [0.0; 3];
            for (j, lj) in l.iter_mut().enumerate() {
                let o = p[(j + 1) % 3];
                *lj = e.grads[j][0] * (q[0] - o[0]) + e.grads[j][1] * (q[1] - o[1]);
            }
            l
        };
        let dwdx: Vec<f64> = (0..n).map(|i| (0..3).map(|j| e.grads[j][0] * s.w(t[j])[i]).sum()).collect();
        for &(g, gw) in &GAUSS3 {
            let q = [x0, a[1] + g * len];
            let l = lam(q);
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = (0..3).map(|j| l[j] * s.w(t[j])[i]).sum();
            }
            let phi: f64 = (0..3).map(|j| l[j] * s.phi(t[j])).sum();
            let c = fem.scenario.immobile.density(q);
            let u0 = model::from_entropy_into(sys, &w, phi, c, &mut u);
            for i in 0..n {
                let flux = -sys.d[i] * u[i] * u0 * dwdx[i];
                current -= weight * gw * len * sys.z[i] * flux;
            }
        }
    }
    if length <= tol {
        return Err(Error::CrossSectionOutsideDomain(x0));
    }
    Ok(current)
}

/// FV current through the cut between cells with centroid left of `x0` and
/// the rest: `I = -sum_i z_i sum_sigma F_{i,K,sigma}` with `K` on the left.
pub fn fv_current(fvm: &Fvm, s: &CellState, x0: f64) -> Result<f64> {
    let mesh = fvm.mesh();
    let sys = fvm.system();
    check_len(s.n_cells(), mesh.n_cells(), "finite-volume state")?;
    let left: Vec<bool> = (0..mesh.n_cells())
        .map(|k| {
            let p = mesh.triangle_points(k);
            (p[0][0] + p[1][0] + p[2][0]) / 3.0 < x0
        })
        .collect();
    let mut current = 0.0;
    let mut crossed = false;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(l) = edge.cells.1 else { continue };
        let k = edge.cells.0;
        if left[k] == left[l] {
            continue;
        }
        crossed = true;
        let sign = if left[k] { 1.0 } else { -1.0 };
        let f = fvm.edge_fluxes(s, e);
        current -= sign * f.iter().zip(&sys.z).map(|(fi, z)| z * fi).sum::<f64>();
    }
    if !crossed {
        return Err(Error::CrossSectionOutsideDomain(x0));
    }
    Ok(current)
}

/// `r(U) = |I(U) / I(-U)|` for every `U > 0` of the curve, in input order.
pub fn rectification(curve: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for &(u, i) in curve.iter().filter(|(u, _)| *u > 0.0) {
        let (_, im) =
            curve.iter().find(|(v, _)| (v + u).abs() <= 1e-12 * u.abs().max(1.0)).ok_or(Error::MissingPair(u))?;
        if *im == 0.0 {
            return Err(Error::ZeroDenominator(u));
        }
        out.push((u, (i / im).abs()));
    }
    Ok(out)
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn estimate_eoc(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() < 3 || err.len() != h.len() {
        return Err(Error::InsufficientRows { needed: 3, got: h.len().min(err.len()) });
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let nf = x.len() as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// One output step of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub time: f64,
    /// Relative entropy to the steady state; `NaN` when none was computed.
    pub entropy_rel: f64,
    pub mass: Vec<f64>,
    pub l1_dist: Vec<f64>,
    pub min_u: Vec<f64>,
    pub max_u: Vec<f64>,
    pub min_u0: f64,
    pub max_u0: f64,
    /// `max (sum_i u_i + c)` over the evaluation points.
    pub max_sum_u: f64,
    pub newton_iters: usize,
}

/// Pointwise statistics of `u` laid out `point * n + i`.
struct Extremes {
    min_u: Vec<f64>,
    max_u: Vec<f64>,
    min_u0: f64,
    max_u0: f64,
    max_sum: f64,
}

fn extremes(u: &[f64], u0: &[f64], c: &[f64], n: usize) -> Extremes {
    let mut ex = Extremes {
        min_u: vec![f64::INFINITY; n],
        max_u: vec![f64::NEG_INFINITY; n],
        min_u0: f64::INFINITY,
        max_u0: f64::NEG_INFINITY,
        max_sum: f64::NEG_INFINITY,
    };
    for (p, (&v0, &cp)) in u0.iter().zip(c).enumerate() {
        let up = &u[p * n..(p + 1) * n];
        for i in 0..n {
            ex.min_u[i] = ex.min_u[i].min(up[i]);
            ex.max_u[i] = ex.max_u[i].max(up[i]);
        }
        ex.min_u0 = ex.min_u0.min(v0);
        ex.max_u0 = ex.max_u0.max(v0);
        ex.max_sum = ex.max_sum.max(up.iter().sum::<f64>() + cp);
    }
    ex
}

/// L1 distance per species between interleaved layouts `point * n + i`.
fn species_l1(a: &[f64], b: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| weights.iter().enumerate().map(|(p, w)| w * (a[p * n + i] - b[p * n + i]).abs()).sum()).collect()
}

/// Record for a finite-element state. Extremes are taken over vertices.
pub fn fe_record(
    fem: &Fem,
    s: &NodalState,
    steady: Option<&NodalState>,
    step: usize,
    time: f64,
    newton_iters: usize,
) -> Result<TimeSeriesRecord> {
    let n = s.n;
    let mesh = fem.mesh();
    let (u, u0) = fem.nodal_u(s);
    let c: Vec<f64> = mesh.vertices().iter().map(|&p| fem.scenario.immobile.density(p)).collect();
    let ex = extremes(&u, &u0, &c, n);
    let (entropy_rel, l1_dist) = match steady {
        Some(ss) => {
            let (us, _) = fem.nodal_u(ss);
            (fe_relative_entropy(fem, s, ss)?, species_l1(&u, &us, &nodal_weights(mesh), n))
        }
        None => (f64::NAN, vec![f64::NAN; n]),
    };
    Ok(TimeSeriesRecord {
        step,
        time,
        entropy_rel,
        mass: fem.mass(s),
        l1_dist,
        min_u: ex.min_u,
        max_u: ex.max_u,
        min_u0: ex.min_u0,
        max_u0: ex.max_u0,
        max_sum_u: ex.max_sum,
        newton_iters,
    })
}

/// Record for a finite-volume state.
pub fn fv_record(
    fvm: &Fvm,
    s: &CellState,
    steady: Option<&CellState>,
    step: usize,
    time: f64,
    newton_iters: usize,
) -> Result<TimeSeriesRecord> {
    let n = s.n;
    let nc = s.n_cells();
    let u: Vec<f64> = (0..nc).flat_map(|k| s.u(k).to_vec()).collect();
    let u0: Vec<f64> = (0..nc).map(|k| fvm.solvent(s, k)).collect();
    let ex = extremes(&u, &u0, fvm.cell_c(), n);
    let (entropy_rel, l1_dist) = match steady {
        Some(ss) => {
            let us: Vec<f64> = (0..nc).flat_map(|k| ss.u(k).to_vec()).collect();
            (fv_relative_entropy(fvm, s, ss)?, species_l1(&u, &us, fvm.mesh().areas(), n))
        }
        None => (f64::NAN, vec![f64::NAN; n]),
    };
    Ok(TimeSeriesRecord {
        step,
        time,
        entropy_rel,
        mass: fvm.mass(s),
        l1_dist,
        min_u: ex.min_u,
        max_u: ex.max_u,
        min_u0: ex.min_u0,
        max_u0: ex.max_u0,
        max_sum_u: ex.max_sum,
        newton_iters,
    })
}

/// Errors per quantity against mesh size, finest row last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub quantities: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub errors: Vec<f64>,
}

impl ConvergenceTable {
    pub fn new(quantities: Vec<String>) -> Self {
        ConvergenceTable { quantities, rows: Vec::new() }
    }

    /// Appends a row; `h` must decrease strictly down the table.
    pub fn push(&mut self, level: usize, h: f64, errors: Vec<f64>) -> Result<()> {
        if errors.len() != self.quantities.len() {
            return Err(Error::DimensionMismatch { expected: self.quantities.len(), got: errors.len() });
        }
        if self.rows.last().is_some_and(|r| !(h < r.h)) {
            return Err(Error::InvalidParameter(format!("mesh size {h} does not decrease")));
        }
        self.rows.push(ConvergenceRow { level, h, errors });
        Ok(())
    }

    /// Fitted order per quantity.
    pub fn eoc(&self) -> Result<Vec<f64>> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        (0..self.quantities.len())
            .map(|q| estimate_eoc(&h, &self.rows.iter().map(|r| r.errors[q]).collect::<Vec<_>>()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norms_of_indicator_and_identity() {
        let w = [0.5, 0.25, 0.25];
        let a = [0.0, 1.0, 0.0];
        assert_eq!(norm(&a, &[0.0; 3], &w, Norm::L1).unwrap(), 0.25);
        assert_eq!(norm(&a, &[0.0; 3], &w, Norm::LInf).unwrap(), 1.0);
        assert_eq!(norm(&a, &a, &w, Norm::L1).unwrap(), 0.0);
        assert!(matches!(norm(&a, &[0.0; 2], &w, Norm::L1), Err(Error::MeshMismatch(_))));
    }

    #[test]
    fn eoc_of_power_laws() {
        let h = [0.4, 0.2, 0.1, 0.05];
        for p in [1.0, 2.0] {
            let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(p)).collect();
            assert!((estimate_eoc(&h, &e).unwrap() - p).abs() < 1e-6);
        }
        assert!(matches!(estimate_eoc(&h[..1], &[1.0]), Err(Error::InsufficientRows { .. })));
    }

    #[test]
    fn table_rejects_increasing_h() {
        let mut t = ConvergenceTable::new(vec!["u1".into()]);
        t.push(0, 0.2, vec![1.0]).unwrap();
        assert!(t.push(1, 0.3, vec![1.0]).is_err());
    }

    #[test]
    fn rectification_pairs() {
        let curve = [(-1.0, -0.5), (-0.5, -0.2), (0.5, 0.4), (1.0, 2.0)];
        let r = rectification(&curve).unwrap();
        assert_eq!(r, vec![(0.5, 2.0), (1.0, 4.0)]);
        assert!(matches!(rectification(&[(1.0, 1.0)]), Err(Error::MissingPair(_))));
        assert!(matches!(rectification(&[(1.0, 1.0), (-1.0, 0.0)]), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn restriction_averages_children() {
        let fine: Vec<f64> = (0..16).map(|v| v as f64).collect();
        assert_eq!(restrict_cells(&fine, 1, 1), vec![1.5, 5.5, 9.5, 13.5]);
        assert_eq!(restrict_cells(&fine, 1, 2), vec![7.5]);
        assert_eq!(restrict_cells(&fine, 2, 1), vec![3.0, 4.0, 11.0, 12.0]);
    }

    #[test]
    fn cut_through_vertex_and_edge() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let (a, b, shared) = cut_segment(p, 0.5, 1e-12).unwrap();
        assert_eq!((a[1], b[1], shared), (0.0, 0.5, false));
        let (a, b, shared) = cut_segment(p, 0.0, 1e-12).unwrap();
        assert_eq!((a[1], b[1], shared), (0.0, 1.0, true));
        assert!(cut_segment(p, 1.0, 1e-12).is_none());
        assert!(cut_segment(p, 2.0, 1e-12).is_none());
    }

    proptest! {
        #[test]
        fn norm_triangle_inequality_and_homogeneity(
            a in prop::collection::vec(-10.0f64..10.0, 6),
            b in prop::collection::vec(-10.0f64..10.0, 6),
            c in prop::collection::vec(-10.0f64..10.0, 6),
            w in prop::collection::vec(0.0f64..2.0, 6),
            s in -5.0f64..5.0,
        ) {
            for which in [Norm::L1, Norm::LInf] {
                let ab = norm(&a, &b, &w, which).unwrap();
                let bc = norm(&b, &c, &w, which).unwrap();
                let ac = norm(&a, &c, &w, which).unwrap();
                prop_assert!(ac <= ab + bc + 1e-12);
                let sa: Vec<f64> = a.iter().map(|v| s * v).collect();
                let sb: Vec<f64> = b.iter().map(|v| s * v).collect();
                prop_assert!((norm(&sa, &sb, &w, which).unwrap() - s.abs() * ab).abs() <= 1e-9 * (1.0 + ab));
            }
        }
    }
}
