//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use ionflux::linsys::AssemblyBuffer;
use ionflux::mesh::{BoundaryTag, CellPointPolicy, Point, StripLattice, TriMesh};
use ionflux::model::{BoundaryData, BoundaryValue, Lifting, SpeciesSystem};
use ionflux::scenarios::Scenario;
use rand::Rng;

/// Prints the criterion line before asserting, so that a failing run still
/// reports every line up to the failure.
pub fn report(id: &str, passed: bool, detail: &str) {
    println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {id} failed: {detail}");
}

pub fn three_species() -> SpeciesSystem {
    SpeciesSystem::new(vec![0.6, 1.0, 1.5], vec![2.0, 1.0, -1.0], 1.3, 0.05).unwrap()
}

/// Rectangle `[0, w] x [0, h]` from a staggered strip lattice; `tag` labels
/// boundary edges by their endpoints.
pub fn box_mesh(w: f64, h: f64, dx: f64, tag: impl Fn(Point, Point) -> BoundaryTag) -> TriMesh {
    let ny = (h / (0.875 * dx)).round().max(1.0) as usize;
    let rows = (0..=ny).map(|j| h * j as f64 / ny as f64).collect();
    let strips = vec![vec![(0.0, w)]; ny];
    StripLattice { x0: 0.0, dx, rows, strips }.build(tag, CellPointPolicy::Circumcenter).unwrap()
}

/// Two acute triangles sharing the edge (1, 2); the edge (0, 1) is Dirichlet.
pub fn two_triangles() -> TriMesh {
    TriMesh::from_arrays(
        vec![[0.0, 0.0], [1.0, 0.1], [0.4, 0.9], [1.3, 1.0]],
        vec![[0, 1, 2], [1, 3, 2]],
        &[
            (0, 1, BoundaryTag::dirichlet("bath")),
            (1, 3, BoundaryTag::Neumann),
            (3, 2, BoundaryTag::Neumann),
            (2, 0, BoundaryTag::Neumann),
        ],
        CellPointPolicy::Circumcenter,
    )
    .unwrap()
}

pub fn scenario_on(mesh: TriMesh, system: SpeciesSystem, ubar: Vec<f64>) -> Scenario {
    let bath = BoundaryValue { u: ubar, phi: 0.2 };
    let mut boundary = BoundaryData::default();
    for name in mesh.dirichlet_names() {
        boundary.set(name, bath.clone());
    }
    Scenario::new("fixture", mesh, system, boundary, Lifting::Constant(bath))
}

/// A central near-equilateral triangle with one triangle glued to each edge,
/// rejected until every angle is acute. Each boundary edge is Dirichlet with
/// probability one half.
pub fn random_four_cells(rng: &mut impl Rng) -> TriMesh {
    loop {
        let mut p: Vec<Point> = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.866]];
        for v in p.iter_mut() {
            v[0] += rng.gen_range(-0.12..0.12);
            v[1] += rng.gen_range(-0.12..0.12);
        }
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let m = [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
            let s = rng.gen_range(0.8..1.2);
            p.push([m[0] + s * (m[0] - c[0]) * 2.0, m[1] + s * (m[1] - c[1]) * 2.0]);
        }
        let tris = vec![[0, 1, 2], [1, 0, 3], [2, 1, 4], [0, 2, 5]];
        if !tris.iter().all(|t| acute([p[t[0]], p[t[1]], p[t[2]]])) {
            continue;
        }
        let mut tags = Vec::new();
        for &(a, b) in &[(0, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 0)] {
            let tag = if rng.gen_bool(0.5) { BoundaryTag::dirichlet("d") } else { BoundaryTag::Neumann };
            tags.push((a, b, tag));
        }
        if let Ok(m) = TriMesh::from_arrays(p, tris, &tags, CellPointPolicy::Circumcenter) {
            return m;
        }
    }
}

/// The same triangulation with every boundary edge Neumann.
pub fn all_neumann(mesh: &TriMesh) -> TriMesh {
    let tags: Vec<_> = mesh.boundary_tags().into_iter().map(|(a, b, _)| (a, b, BoundaryTag::Neumann)).collect();
    TriMesh::from_arrays(mesh.vertices().to_vec(), mesh.triangles().to_vec(), &tags, CellPointPolicy::Circumcenter)
        .unwrap()
}

fn acute(p: [Point; 3]) -> bool {
    (0..3).all(|k| {
        let (o, a, b) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        (a[0] - o[0]) * (b[0] - o[0]) + (a[1] - o[1]) * (b[1] - o[1]) > 1e-3
    })
}

/// Random interior cell state `(u_1..u_n, Phi)` per cell with
/// `sum u + c <= 0.95 (1 - c)`.
pub fn random_cell_state(rng: &mut impl Rng, n: usize, c: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(c.len() * (n + 1));
    for &ck in c {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..1.0)).collect();
        let total = rng.gen_range(0.1..0.95) * (1.0 - ck);
        let s: f64 = raw.iter().sum();
        x.extend(raw.iter().map(|r| r * total / s));
        x.push(rng.gen_range(-1.0..1.0));
    }
    x
}

pub fn circumcenter(p: [Point; 3]) -> Point {
    let (ax, ay) = (p[0][0], p[0][1]);
    let (bx, by) = (p[1][0] - ax, p[1][1] - ay);
    let (cx, cy) = (p[2][0] - ax, p[2][1] - ay);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [ax + (cy * b2 - by * c2) / d, ay + (bx * c2 - cx * b2) / d]
}

fn hypot(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn mid(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Reference FV residual, written directly from the scheme's definition with
/// its own geometry. `cell_c` and `cell_f` are the immobile density and
/// charge per cell, `bc(name)` the Dirichlet data and `bc_c(midpoint)` the
/// immobile density on boundary edges.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_fv_residual(
    mesh: &TriMesh,
    sys: &SpeciesSystem,
    tags: &[(usize, usize, BoundaryTag)],
    bc: &dyn Fn(&str) -> BoundaryValue,
    bc_c: &dyn Fn(Point) -> f64,
    cell_c: &[f64],
    cell_f: &[f64],
    x: &[f64],
    old: Option<(&[f64], f64)>,
) -> Vec<f64> {
    let n = sys.n();
    let m = n + 1;
    let tris = mesh.triangles();
    let pts = mesh.vertices();
    let nc = tris.len();
    let centers: Vec<Point> = tris.iter().map(|t| circumcenter([pts[t[0]], pts[t[1]], pts[t[2]]])).collect();
    let area = |t: &[usize; 3]| {
        let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs()
    };
    let u = |k: usize, i: usize| x[k * m + i];
    let phi = |k: usize| x[k * m + n];
    let solvent = |us: &[f64], c: f64| if sys.linear_pnp { 1.0 } else { 1.0 - us.iter().sum::<f64>() - c };
    let u0 = |k: usize| solvent(&x[k * m..k * m + n], cell_c[k]);
    // Flux of species i out of K towards the values (u_l, u0_l, phi_l).
    let flux = |i: usize, tr: f64, k: usize, ul: &[f64], u0l: f64, pl: f64| {
        let (u0k, pk) = (u0(k), phi(k));
        let dphi = pl - pk;
        let u0s = u0k.max(u0l);
        let u0hat = if sys.z[i] * dphi >= 0.0 { u0k } else { u0l };
        let v = (u0l - u0k) - u0hat * sys.beta * sys.z[i] * dphi;
        let upw = if v >= 0.0 { u(k, i) } else { ul[i] };
        -tr * sys.d[i] * (u0s * (ul[i] - u(k, i)) - upw * v)
    };
    let mut r = vec![0.0; nc * m];
    for (k, t) in tris.iter().enumerate() {
        let a = area(t);
        for i in 0..n {
            if let Some((xo, tau)) = old {
                r[k * m + i] += a * (u(k, i) - xo[k * m + i]) / tau;
            }
        }
        let charge: f64 = (0..n).map(|i| sys.z[i] * u(k, i)).sum::<f64>() + cell_f[k];
        r[k * m + n] -= a * charge;
        for e in 0..3 {
            let (va, vb) = (t[e], t[(e + 1) % 3]);
            let len = hypot(pts[va], pts[vb]);
            let other =
                tris.iter().enumerate().find(|(l, s)| *l != k && s.contains(&va) && s.contains(&vb)).map(|(l, _)| l);
            match other {
                Some(l) => {
                    let tr = len / hypot(centers[k], centers[l]);
                    let ul: Vec<f64> = (0..n).map(|i| u(l, i)).collect();
                    for i in 0..n {
                        r[k * m + i] += flux(i, tr, k, &ul, u0(l), phi(l));
                    }
                    r[k * m + n] -= sys.lambda2 * tr * (phi(l) - phi(k));
                }
                None => {
                    let tag = tags
                        .iter()
                        .find(|(p, q, _)| (*p == va && *q == vb) || (*p == vb && *q == va))
                        .map(|(_, _, t)| t.clone())
                        .expect("boundary edge is tagged");
                    if let BoundaryTag::Dirichlet(name) = tag {
                        let ms = mid(pts[va], pts[vb]);
                        let tr = len / hypot(centers[k], ms);
                        let b = bc(&name);
                        let u0b = solvent(&b.u, bc_c(ms));
                        for i in 0..n {
                            r[k * m + i] += flux(i, tr, k, &b.u, u0b, b.phi);
                        }
                        r[k * m + n] -= sys.lambda2 * tr * (b.phi - phi(k));
                    }
                }
            }
        }
    }
    if !tags.iter().any(|(_, _, t)| matches!(t, BoundaryTag::Dirichlet(_))) {
        r[n] = x[n];
    }
    r
}

pub fn dense(buf: &AssemblyBuffer) -> Vec<Vec<f64>> {
    let n = buf.dim();
    let mut a = vec![vec![0.0; n]; n];
    buf.for_each(|i, j, v| a[i][j] += v);
    a
}

/// Largest relative deviation of `J d` from the central difference of the
/// residual along `d`.
pub fn directional_fd_error(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    jac: &[Vec<f64>],
    x: &[f64],
    dir: &[f64],
    h: f64,
) -> f64 {
    let xp: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a - h * b).collect();
    let (rp, rm) = (residual(&xp), residual(&xm));
    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    let jd: Vec<f64> = jac.iter().map(|row| row.iter().zip(dir).map(|(a, b)| a * b).sum()).collect();
    let scale = jd.iter().chain(&fd).fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    fd.iter().zip(&jd).fold(0.0f64, |a, (f, j)| a.max((f - j).abs())) / scale
}
