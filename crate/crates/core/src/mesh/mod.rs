//! Conforming triangulations with the dual geometry used by both schemes.
//!
//! A [`TriMesh`] is immutable once built. It stores the vertices, counter-
//! clockwise triangles, the edge graph with boundary classification and, per
//! edge, the two-point-flux data ([`EdgeDual`]) computed from the chosen cell
//! points.

mod io;
mod lattice;
mod refine;

use std::collections::HashMap;

use crate::{Error, Result};

pub use io::{format_mesh, parse_mesh, read_mesh, write_mesh};
pub use lattice::StripLattice;

pub type Point = [f64; 2];

/// Minimum triangle area accepted by [`TriMesh::from_arrays`].
pub const MIN_AREA: f64 = 1e-14;

/// Tag carried by an external edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet(String),
    Neumann,
}

impl BoundaryTag {
    pub fn dirichlet(name: &str) -> Self {
        BoundaryTag::Dirichlet(name.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Internal,
    /// Index into [`TriMesh::dirichlet_names`].
    Dirichlet(usize),
    Neumann,
}

/// How the per-cell point `x_K` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CellPointPolicy {
    /// Orthogonal to every edge on Delaunay meshes, required by the finite-volume scheme.
    #[default]
    Circumcenter,
    Barycenter,
}

/// Two-point-flux geometry of one edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeDual {
    /// Edge length `m(sigma)`.
    pub measure: f64,
    /// `d_sigma`: signed distance `(x_L - x_K) . n` for internal edges and
    /// `(x_sigma - x_K) . n` for boundary edges. Positive on admissible meshes.
    pub dist: f64,
    /// `m(sigma) / d_sigma`.
    pub transmissibility: f64,
    /// Unit normal pointing out of the first incident cell.
    pub normal: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, in the counter-clockwise order of the first incident cell.
    pub vertices: [usize; 2],
    /// First incident cell and, for internal edges, the second one.
    pub cells: (usize, Option<usize>),
    pub kind: EdgeKind,
    pub dual: EdgeDual,
}

impl Edge {
    /// The cell across the edge as seen from `cell`.
    pub fn neighbor(&self, cell: usize) -> Option<usize> {
        match self.cells {
            (k, Some(l)) if k == cell => Some(l),
            (k, Some(_)) => Some(k),
            _ => None,
        }
    }

    /// Unit normal pointing out of `cell`.
    pub fn normal_from(&self, cell: usize) -> Point {
        let n = self.dual.normal;
        if self.cells.0 == cell {
            n
        } else {
            [-n[0], -n[1]]
        }
    }
}

/// Per-triangle data for linear finite elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct P1Element {
    pub area: f64,
    /// Constant gradients of the three nodal hat functions.
    pub grads: [Point; 3],
}

/// Gradients of the P1 hat functions on one triangle.
pub fn p1_element(p: [Point; 3]) -> Result<P1Element> {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    if area2.abs() < 2.0 * MIN_AREA {
        return Err(Error::DegenerateTriangle(0, 0.5 * area2.abs()));
    }
    let mut grads = [[0.0; 2]; 3];
    for j in 0..3 {
        let a = p[(j + 1) % 3];
        let b = p[(j + 2) % 3];
        grads[j] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    Ok(P1Element { area: 0.5 * area2.abs(), grads })
}

pub fn circumcenter(p: [Point; 3]) -> Point {
    let [a, b, c] = p;
    let bx = b[0] - a[0];
    let by = b[1] - a[1];
    let cx = c[0] - a[0];
    let cy = c[1] - a[1];
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

pub fn barycenter(p: [Point; 3]) -> Point {
    [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn signed_area(p: [Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdmissibilityIssue {
    /// The segment `x_K x_L` is not parallel to the edge normal.
    NonOrthogonal {
        edge: usize,
        angle: f64,
    },
    NonPositiveDistance {
        edge: usize,
        dist: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdmissibilityReport {
    pub issues: Vec<AdmissibilityIssue>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Local edge `j` of a cell joins local vertices `j` and `j + 1`.
    cell_edges: Vec<[usize; 3]>,
    cell_points: Vec<Point>,
    areas: Vec<f64>,
    dirichlet_names: Vec<String>,
    vertex_dirichlet: Vec<Option<usize>>,
    policy: CellPointPolicy,
    gamma: f64,
    diameter: f64,
}

impl TriMesh {
    /// Builds the edge topology and dual geometry.
    ///
    /// Triangles given clockwise are reoriented. Every boundary edge must
    /// appear exactly once in `boundary` (in either vertex order).
    pub fn from_arrays(
        points: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &[(usize, usize, BoundaryTag)],
        policy: CellPointPolicy,
    ) -> Result<TriMesh> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let nv = points.len();
        let mut tris = triangles;
        let mut areas = Vec::with_capacity(tris.len());
        for (k, t) in tris.iter_mut().enumerate() {
            for &v in t.iter() {
                if v >= nv {
                    return Err(Error::IndexOutOfRange { index: v, len: nv });
                }
            }
            let mut a = signed_area([points[t[0]], points[t[1]], points[t[2]]]);
            if a.abs() < MIN_AREA {
                return Err(Error::DegenerateTriangle(k, a.abs()));
            }
            if a < 0.0 {
                t.swap(1, 2);
                a = -a;
            }
            areas.push(a);
        }

        let mut dirichlet_names: Vec<String> = Vec::new();
        let mut tag_of: HashMap<(usize, usize), EdgeKind> = HashMap::with_capacity(boundary.len());
        for (a, b, tag) in boundary {
            for &v in [a, b] {
                if v >= nv {
                    return Err(Error::IndexOutOfRange { index: v, len: nv });
                }
            }
            let kind = match tag {
                BoundaryTag::Neumann => EdgeKind::Neumann,
                BoundaryTag::Dirichlet(name) => {
                    let id = match dirichlet_names.iter().position(|n| n == name) {
                        Some(id) => id,
                        None => {
                            dirichlet_names.push(name.clone());
                            dirichlet_names.len() - 1
                        }
                    };
                    EdgeKind::Dirichlet(id)
                }
            };
            tag_of.insert(edge_key(*a, *b), kind);
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * tris.len() / 2 + 8);
        let mut raw: Vec<([usize; 2], usize, Option<usize>)> = Vec::with_capacity(3 * tris.len() / 2 + 8);
        let mut cell_edges = Vec::with_capacity(tris.len());
        for (k, t) in tris.iter().enumerate() {
            let mut ce = [0usize; 3];
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                let key = edge_key(a, b);
                let e = match index.get(&key) {
                    Some(&e) => {
                        if raw[e].2.is_some() {
                            return Err(Error::NonConforming(key.0, key.1));
                        }
                        raw[e].2 = Some(k);
                        e
                    }
                    None => {
                        raw.push(([a, b], k, None));
                        index.insert(key, raw.len() - 1);
                        raw.len() - 1
                    }
                };
                ce[j] = e;
            }
            cell_edges.push(ce);
        }

        let mut kinds = Vec::with_capacity(raw.len());
        for (verts, _, second) in &raw {
            let key = edge_key(verts[0], verts[1]);
            let kind = match second {
                Some(_) => {
                    if tag_of.contains_key(&key) {
                        return Err(Error::TagOnNonBoundaryEdge(key.0, key.1));
                    }
                    EdgeKind::Internal
                }
                None => *tag_of.get(&key).ok_or(Error::UntaggedBoundaryEdge(key.0, key.1))?,
            };
            kinds.push(kind);
        }
        for key in tag_of.keys() {
            if !index.contains_key(key) {
                return Err(Error::TagOnNonBoundaryEdge(key.0, key.1));
            }
        }

        let mut vertex_dirichlet = vec![None; nv];
        for ((verts, _, _), kind) in raw.iter().zip(&kinds) {
            if let EdgeKind::Dirichlet(id) = kind {
                for &v in verts {
                    vertex_dirichlet[v].get_or_insert(*id);
                }
            }
        }

        let mut gamma: f64 = 1.0;
        let mut diameter: f64 = 0.0;
        for (t, &a) in tris.iter().zip(&areas) {
            let p = [points[t[0]], points[t[1]], points[t[2]]];
            let l = [dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])];
            let h = l[0].max(l[1]).max(l[2]);
            let rho = 2.0 * a / (l[0] + l[1] + l[2]);
            gamma = gamma.max(h / rho);
            diameter = diameter.max(h);
        }

        let edges = raw
            .into_iter()
            .zip(kinds)
            .map(|((vertices, k, l), kind)| Edge {
                vertices,
                cells: (k, l),
                kind,
                dual: EdgeDual { measure: 0.0, dist: 0.0, transmissibility: 0.0, normal: [0.0; 2] },
            })
            .collect();

        let mut mesh = TriMesh {
            vertices: points,
            triangles: tris,
            edges,
            cell_edges,
            cell_points: Vec::new(),
            areas,
            dirichlet_names,
            vertex_dirichlet,
            policy,
            gamma,
            diameter,
        };
        mesh.assign_cell_points(policy);
        Ok(mesh)
    }

    /// Same topology with cell points recomputed under another policy.
    pub fn with_cell_points(&self, policy: CellPointPolicy) -> TriMesh {
        let mut m = self.clone();
        m.assign_cell_points(policy);
        m
    }

    fn assign_cell_points(&mut self, policy: CellPointPolicy) {
        self.policy = policy;
        self.cell_points = (0..self.triangles.len())
            .map(|k| {
                let p = self.triangle_points(k);
                match policy {
                    CellPointPolicy::Circumcenter => circumcenter(p),
                    CellPointPolicy::Barycenter => barycenter(p),
                }
            })
            .collect();
        for e in 0..self.edges.len() {
            let edge = &self.edges[e];
            let a = self.vertices[edge.vertices[0]];
            let b = self.vertices[edge.vertices[1]];
            let measure = dist(a, b);
            let normal = [(b[1] - a[1]) / measure, (a[0] - b[0]) / measure];
            let xk = self.cell_points[edge.cells.0];
            let target = match edge.cells.1 {
                Some(l) => self.cell_points[l],
                None => [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
            };
            let d = (target[0] - xk[0]) * normal[0] + (target[1] - xk[1]) * normal[1];
            self.edges[e].dual = EdgeDual { measure, dist: d, transmissibility: measure / d, normal };
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }
    pub fn cell_points(&self) -> &[Point] {
        &self.cell_points
    }
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_cells(&self) -> usize {
        self.triangles.len()
    }
    pub fn policy(&self) -> CellPointPolicy {
        self.policy
    }
    /// Recorded shape-regularity constant `max h_K / rho_K`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Maximal triangle diameter `h`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
    pub fn dirichlet_names(&self) -> &[String] {
        &self.dirichlet_names
    }
    pub fn dirichlet_region(&self, name: &str) -> Option<usize> {
        self.dirichlet_names.iter().position(|n| n == name)
    }
    /// Dirichlet region of a vertex lying on a Dirichlet edge.
    pub fn vertex_dirichlet(&self, v: usize) -> Option<usize> {
        self.vertex_dirichlet[v]
    }
    pub fn has_dirichlet(&self) -> bool {
        self.edges.iter().any(|e| matches!(e.kind, EdgeKind::Dirichlet(_)))
    }

    pub fn triangle_points(&self, cell: usize) -> [Point; 3] {
        let t = self.triangles[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Per-triangle hat-function gradients and areas.
    pub fn p1_reference_data(&self) -> Vec<P1Element> {
        (0..self.n_cells()).map(|k| p1_element(self.triangle_points(k)).expect("validated at construction")).collect()
    }

    /// Lists edges that break the two-point-flux admissibility condition.
    pub fn check_admissibility(&self, tol: f64) -> AdmissibilityReport {
        let mut issues = Vec::new();
        for (e, edge) in self.edges.iter().enumerate() {
            if let Some(l) = edge.cells.1 {
                let xk = self.cell_points[edge.cells.0];
                let xl = self.cell_points[l];
                let d = [xl[0] - xk[0], xl[1] - xk[1]];
                let len = d[0].hypot(d[1]);
                if len > tol {
                    let n = edge.dual.normal;
                    let cross = (d[0] * n[1] - d[1] * n[0]) / len;
                    let angle = cross.abs().asin();
                    if angle > tol {
                        issues.push(AdmissibilityIssue::NonOrthogonal { edge: e, angle });
                    }
                }
            }
            if edge.dual.dist <= tol {
                issues.push(AdmissibilityIssue::NonPositiveDistance { edge: e, dist: edge.dual.dist });
            }
        }
        AdmissibilityReport { issues }
    }

    /// Fails on the first edge with `d_sigma <= tol` or a non-orthogonal dual segment.
    pub fn require_admissible(&self, tol: f64) -> Result<()> {
        match self.check_admissibility(tol).issues.first() {
            None => Ok(()),
            Some(AdmissibilityIssue::NonPositiveDistance { edge, dist }) => {
                Err(Error::AdmissibilityViolation { edge: *edge, dist: *dist })
            }
            Some(AdmissibilityIssue::NonOrthogonal { edge, .. }) => {
                Err(Error::AdmissibilityViolation { edge: *edge, dist: self.edges[*edge].dual.dist })
            }
        }
    }

    /// Boundary edges as `(a, b, tag)` triples.
    pub fn boundary_tags(&self) -> Vec<(usize, usize, BoundaryTag)> {
        self.edges
            .iter()
            .filter_map(|e| {
                let tag = match e.kind {
                    EdgeKind::Internal => return None,
                    EdgeKind::Neumann => BoundaryTag::Neumann,
                    EdgeKind::Dirichlet(id) => BoundaryTag::Dirichlet(self.dirichlet_names[id].clone()),
                };
                Some((e.vertices[0], e.vertices[1], tag))
            })
            .collect()
    }

    /// Uniform red refinement: each triangle is split into four similar ones.
    ///
    /// Children of cell `k` are cells `4k..4k + 4`; vertex `n_vertices + e`
    /// is the midpoint of edge `e`.
    pub fn regular_refine(&self) -> TriMesh {
        refine::regular_refine(self)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
