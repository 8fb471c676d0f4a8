use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, CellPointPolicy, Point, TriMesh};
use crate::{Error, Result};

/// Parses the plain-text mesh format.
///
/// ```text
/// # comment
/// <n_vertices> <n_triangles> <n_boundary_edges>
/// x y            (n_vertices lines)
/// i j k          (n_triangles lines, 0-based)
/// a b TAG        (TAG is N or D:<name>)
/// ```
pub fn parse_mesh(text: &str, policy: CellPointPolicy) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::MeshParse { line: 0, msg: format!("unexpected end of file, expected {what}") })?;
        Ok((n, l.split_whitespace().map(str::to_string).collect()))
    };
    let (ln, head) = next("header")?;
    if head.len() != 3 {
        return Err(Error::MeshParse { line: ln, msg: "header needs three counts".into() });
    }
    let counts: Vec<usize> = head
        .iter()
        .map(|t| t.parse().map_err(|_| Error::MeshParse { line: ln, msg: format!("bad count {t:?}") }))
        .collect::<Result<_>>()?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

    fn num<T: std::str::FromStr>(line: usize, t: &str) -> Result<T> {
        t.parse().map_err(|_| Error::MeshParse { line, msg: format!("bad number {t:?}") })
    }

    let mut points: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, tok) = next("vertex")?;
        if tok.len() != 2 {
            return Err(Error::MeshParse { line: ln, msg: "vertex needs x y".into() });
        }
        points.push([num(ln, &tok[0])?, num(ln, &tok[1])?]);
    }
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, tok) = next("triangle")?;
        if tok.len() != 3 {
            return Err(Error::MeshParse { line: ln, msg: "triangle needs three indices".into() });
        }
        tris.push([num(ln, &tok[0])?, num(ln, &tok[1])?, num(ln, &tok[2])?]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, tok) = next("boundary edge")?;
        if tok.len() != 3 {
            return Err(Error::MeshParse { line: ln, msg: "boundary edge needs a b TAG".into() });
        }
        let tag = match tok[2].as_str() {
            "N" => BoundaryTag::Neumann,
            t => match t.strip_prefix("D:") {
                Some(name) if !name.is_empty() => BoundaryTag::dirichlet(name),
                _ => return Err(Error::MeshParse { line: ln, msg: format!("bad tag {t:?}") }),
            },
        };
        boundary.push((num(ln, &tok[0])?, num(ln, &tok[1])?, tag));
    }
    if let Ok((ln, _)) = next("") {
        return Err(Error::MeshParse { line: ln, msg: "trailing content".into() });
    }
    TriMesh::from_arrays(points, tris, &boundary, policy)
}

pub fn read_mesh(path: &Path, policy: CellPointPolicy) -> Result<TriMesh> {
    parse_mesh(&std::fs::read_to_string(path)?, policy)
}

pub fn format_mesh(mesh: &TriMesh) -> String {
    let tags = mesh.boundary_tags();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.n_cells(), tags.len());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for (a, b, tag) in tags {
        match tag {
            BoundaryTag::Neumann => {
                let _ = writeln!(s, "{a} {b} N");
            }
            BoundaryTag::Dirichlet(n) => {
                let _ = writeln!(s, "{a} {b} D:{n}");
            }
        }
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str =
        "# square\n4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1 N\n1 2 D:right\n2 3 N\n3 0 D:left # inline\n";

    #[test]
    fn parse_and_round_trip() {
        let m = parse_mesh(SRC, CellPointPolicy::Barycenter).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.dirichlet_names(), &["right".to_string(), "left".to_string()]);
        let again = parse_mesh(&format_mesh(&m), CellPointPolicy::Barycenter).unwrap();
        assert_eq!(again.vertices(), m.vertices());
        assert_eq!(again.triangles(), m.triangles());
        assert_eq!(again.boundary_tags(), m.boundary_tags());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = SRC.replace("1 2 D:right", "1 2 X");
        assert!(matches!(parse_mesh(&bad, CellPointPolicy::Barycenter), Err(Error::MeshParse { line: 10, .. })));
        let short = "4 2 4\n0 0\n";
        assert!(matches!(parse_mesh(short, CellPointPolicy::Barycenter), Err(Error::MeshParse { .. })));
        let bad_num = SRC.replace("1 0\n1 1", "1 zero\n1 1");
        assert!(matches!(parse_mesh(&bad_num, CellPointPolicy::Barycenter), Err(Error::MeshParse { line: 4, .. })));
    }
}
