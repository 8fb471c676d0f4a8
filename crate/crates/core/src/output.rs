//! CSV tables and legacy VTK field files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! identical runs give byte-identical files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::diagnostics::{ConvergenceTable, TimeSeriesRecord};
use crate::mesh::TriMesh;
use crate::studies::SweepPoint;
use crate::Result;

/// Header for `n` species:
/// `step,time,entropy_rel,mass_1..mass_n,l1_dist_1..l1_dist_n,min_u0,max_sum_u,newton_iters`.
pub fn time_series_header(n: usize) -> String {
    let mut h = String::from("step,time,entropy_rel");
    for i in 1..=n {
        write!(h, ",mass_{i}").unwrap();
    }
    for i in 1..=n {
        write!(h, ",l1_dist_{i}").unwrap();
    }
    h.push_str(",min_u0,max_sum_u,newton_iters");
    h
}

pub fn time_series_row(r: &TimeSeriesRecord) -> String {
    let mut s = format!("{},{:?},{:?}", r.step, r.time, r.entropy_rel);
    for v in r.mass.iter().chain(&r.l1_dist) {
        write!(s, ",{v:?}").unwrap();
    }
    write!(s, ",{:?},{:?},{}", r.min_u0, r.max_sum_u, r.newton_iters).unwrap();
    s
}

pub fn time_series_csv(records: &[TimeSeriesRecord]) -> String {
    let n = records.first().map_or(0, |r| r.mass.len());
    let mut out = time_series_header(n);
    out.push('\n');
    for r in records {
        out.push_str(&time_series_row(r));
        out.push('\n');
    }
    out
}

/// `level,h,<quantity>...` rows followed by one `eoc` row (empty `level`).
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("level,h");
    for q in &table.quantities {
        write!(out, ",{q}").unwrap();
    }
    out.push('\n');
    for r in &table.rows {
        write!(out, "{},{:?}", r.level, r.h).unwrap();
        for e in &r.errors {
            write!(out, ",{e:?}").unwrap();
        }
        out.push('\n');
    }
    if let Ok(eoc) = table.eoc() {
        out.push_str("eoc,");
        for e in eoc {
            write!(out, ",{e:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Current-voltage rows `voltage,current,rectification`; the last column
/// is filled for positive voltages with a matching negative one, and a
/// failed point leaves `current` empty and records the error.
pub fn sweep_csv(points: &[SweepPoint], rect: &[(f64, f64)]) -> String {
    let mut out = String::from("voltage,current,rectification,error\n");
    for p in points {
        let u = p.voltage;
        let r = rect.iter().find(|(v, _)| *v == u).map(|(_, r)| format!("{r:?}")).unwrap_or_default();
        match &p.current {
            Ok(i) => writeln!(out, "{u:?},{i:?},{r},").unwrap(),
            Err(e) => writeln!(out, "{u:?},,,{}", e.replace(',', ";")).unwrap(),
        }
    }
    out
}

/// A named scalar field on points or cells.
pub struct Field<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Legacy ASCII VTK unstructured grid with point and cell scalars.
pub fn vtk_string(mesh: &TriMesh, point_data: &[Field], cell_data: &[Field]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nionflux\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:?} {:?} 0.0", p[0], p[1]).unwrap();
    }
    let nc = mesh.n_cells();
    writeln!(s, "CELLS {} {}", nc, 4 * nc).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nc}").unwrap();
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let section = |s: &mut String, kind: &str, count: usize, fields: &[Field]| {
        if fields.is_empty() {
            return;
        }
        writeln!(s, "{kind} {count}").unwrap();
        for f in fields {
            writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name).unwrap();
            for v in f.values {
                writeln!(s, "{v:?}").unwrap();
            }
        }
    };
    section(&mut s, "POINT_DATA", mesh.n_vertices(), point_data);
    section(&mut s, "CELL_DATA", nc, cell_data);
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryTag, CellPointPolicy};

    fn record() -> TimeSeriesRecord {
        TimeSeriesRecord {
            step: 3,
            time: 0.1 + 0.2,
            entropy_rel: 1e-3,
            mass: vec![0.5, 0.25],
            l1_dist: vec![1.0, 2.0],
            min_u: vec![0.0; 2],
            max_u: vec![1.0; 2],
            min_u0: 0.125,
            max_u0: 0.9,
            max_sum_u: 0.875,
            newton_iters: 4,
        }
    }

    #[test]
    fn time_series_columns() {
        let csv = time_series_csv(&[record()]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,time,entropy_rel,mass_1,mass_2,l1_dist_1,l1_dist_2,min_u0,max_sum_u,newton_iters"
        );
        assert_eq!(lines.next().unwrap(), "3,0.30000000000000004,0.001,0.5,0.25,1.0,2.0,0.125,0.875,4");
    }

    #[test]
    fn vtk_layout() {
        let m = TriMesh::from_arrays(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            &[(0, 1, BoundaryTag::Neumann), (1, 2, BoundaryTag::Neumann), (2, 0, BoundaryTag::Neumann)],
            CellPointPolicy::Barycenter,
        )
        .unwrap();
        let s =
            vtk_string(&m, &[Field { name: "phi", values: &[1.0, 2.0, 3.0] }], &[Field { name: "u", values: &[0.5] }]);
        assert!(s.contains("POINTS 3 double\n0.0 0.0 0.0\n"));
        assert!(s.contains("CELLS 1 4\n3 0 1 2\nCELL_TYPES 1\n5\n"));
        assert!(s.contains("POINT_DATA 3\nSCALARS phi double 1\nLOOKUP_TABLE default\n1.0\n2.0\n3.0\n"));
        assert!(s.ends_with("CELL_DATA 1\nSCALARS u double 1\nLOOKUP_TABLE default\n0.5\n"));
    }

    #[test]
    fn sweep_rows() {
        let pts: Vec<SweepPoint> = [(-1.0, Ok(-0.5)), (1.0, Ok(1.0)), (2.0, Err("Newton, diverged".to_string()))]
            .into_iter()
            .map(|(voltage, current)| SweepPoint { voltage, current })
            .collect();
        let csv = sweep_csv(&pts, &[(1.0, 2.0)]);
        assert_eq!(csv, "voltage,current,rectification,error\n-1.0,-0.5,,\n1.0,1.0,2.0,\n2.0,,,Newton; diverged\n");
    }
}
