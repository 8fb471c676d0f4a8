use super::{BoundaryTag, EdgeKind, Point, TriMesh};

pub(super) fn regular_refine(mesh: &TriMesh) -> TriMesh {
    let nv = mesh.n_vertices();
    let mut points: Vec<Point> = mesh.vertices().to_vec();
    points.reserve(mesh.edges().len());
    for e in mesh.edges() {
        let a = mesh.vertices()[e.vertices[0]];
        let b = mesh.vertices()[e.vertices[1]];
        points.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut tris = Vec::with_capacity(4 * mesh.n_cells());
    for (k, t) in mesh.triangles().iter().enumerate() {
        let ce = mesh.cell_edges(k);
        let (m01, m12, m20) = (nv + ce[0], nv + ce[1], nv + ce[2]);
        tris.push([t[0], m01, m20]);
        tris.push([m01, t[1], m12]);
        tris.push([m20, m12, t[2]]);
        tris.push([m01, m12, m20]);
    }
    let mut boundary = Vec::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        let tag = match edge.kind {
            EdgeKind::Internal => continue,
            EdgeKind::Neumann => BoundaryTag::Neumann,
            EdgeKind::Dirichlet(id) => BoundaryTag::Dirichlet(mesh.dirichlet_names()[id].clone()),
        };
        boundary.push((edge.vertices[0], nv + e, tag.clone()));
        boundary.push((nv + e, edge.vertices[1], tag));
    }
    let mut fine =
        TriMesh::from_arrays(points, tris, &boundary, mesh.policy()).expect("refinement of a valid mesh is valid");
    // Keep region numbering of the parent.
    if fine.dirichlet_names != mesh.dirichlet_names {
        let remap: Vec<usize> =
            fine.dirichlet_names.iter().map(|n| mesh.dirichlet_region(n).expect("same tags")).collect();
        for e in &mut fine.edges {
            if let EdgeKind::Dirichlet(id) = &mut e.kind {
                *id = remap[*id];
            }
        }
        for v in fine.vertex_dirichlet.iter_mut().flatten() {
            *v = remap[*v];
        }
        fine.dirichlet_names = mesh.dirichlet_names.clone();
    }
    fine
}

#[cfg(test)]
mod tests {
    use super::super::*;

    fn acute_triangle() -> TriMesh {
        let pts = vec![[0.0, 0.0], [1.0, 0.1], [0.4, 0.9]];
        let b = vec![
            (0, 1, BoundaryTag::dirichlet("a")),
            (1, 2, BoundaryTag::Neumann),
            (2, 0, BoundaryTag::dirichlet("b")),
        ];
        TriMesh::from_arrays(pts, vec![[0, 1, 2]], &b, CellPointPolicy::Circumcenter).unwrap()
    }

    #[test]
    fn children_are_contiguous_and_similar() {
        let m = acute_triangle();
        let f = m.regular_refine().regular_refine();
        assert_eq!(f.n_cells(), 16);
        let a0 = m.areas()[0];
        for a in f.areas() {
            assert!((a - a0 / 16.0).abs() < 1e-15);
        }
        // Children of coarse cell k are 4k..4k+4 after one level.
        let f1 = m.regular_refine();
        let parent = m.triangle_points(0);
        for c in 0..4 {
            let b = barycenter(f1.triangle_points(c));
            let e = p1_element(parent).unwrap();
            // Barycentric coordinates of the child barycenter are all positive.
            for j in 0..3 {
                let lam = 1.0 / 3.0
                    + e.grads[j][0] * (b[0] - barycenter(parent)[0])
                    + e.grads[j][1] * (b[1] - barycenter(parent)[1]);
                assert!(lam > 0.0);
            }
        }
        assert!((f.gamma() - m.gamma()).abs() < 1e-9);
        assert!((f.diameter() - m.diameter() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn tags_and_region_ids_survive() {
        let m = acute_triangle();
        let f = m.regular_refine().regular_refine();
        assert_eq!(f.dirichlet_names(), m.dirichlet_names());
        let count = |mesh: &TriMesh, kind: EdgeKind| mesh.edges().iter().filter(|e| e.kind == kind).count();
        assert_eq!(count(&f, EdgeKind::Dirichlet(0)), 4);
        assert_eq!(count(&f, EdgeKind::Dirichlet(1)), 4);
        assert_eq!(count(&f, EdgeKind::Neumann), 4);
        assert!(f.check_admissibility(1e-12).is_admissible());
    }

    #[test]
    fn right_triangles_lose_admissibility() {
        // A right triangle glued along its hypotenuse to an acute one.
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.2, 1.2]];
        let b = vec![
            (0, 1, BoundaryTag::Neumann),
            (1, 3, BoundaryTag::Neumann),
            (3, 2, BoundaryTag::Neumann),
            (2, 0, BoundaryTag::Neumann),
        ];
        let m = TriMesh::from_arrays(pts, vec![[0, 1, 2], [1, 3, 2]], &b, CellPointPolicy::Circumcenter).unwrap();
        assert!(m.check_admissibility(1e-12).is_admissible());
        assert!(!m.regular_refine().check_admissibility(1e-12).is_admissible());
    }
}
