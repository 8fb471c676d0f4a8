use super::{BoundaryTag, CellPointPolicy, Point, TriMesh};
use crate::{Error, Result};

/// Structured mesher for domains that are unions of axis-aligned rectangles.
///
/// Horizontal rows at heights `rows[j]` carry lattice points
/// `x0 + (k + s_j) dx` with `s_j = 0` on even rows and `1/2` on odd rows.
/// Strip `j` (between rows `j` and `j + 1`) covers the x-intervals
/// `strips[j]` and is zipped into triangles. Interval endpoints are added to
/// the rows; each strip is zipped along the shorter diagonal.
#[derive(Clone, Debug)]
pub struct StripLattice {
    pub x0: f64,
    pub dx: f64,
    pub rows: Vec<f64>,
    pub strips: Vec<Vec<(f64, f64)>>,
}

impl StripLattice {
    fn row_points(&self, j: usize) -> Vec<f64> {
        let tol = 1e-9 * self.dx;
        let mut ivs: Vec<(f64, f64)> = Vec::new();
        if j > 0 {
            ivs.extend(&self.strips[j - 1]);
        }
        if j < self.strips.len() {
            ivs.extend(&self.strips[j]);
        }
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        let mut xs = Vec::new();
        for &(a, b) in &ivs {
            xs.push(a);
            xs.push(b);
            let k0 = ((a - self.x0) / self.dx - shift).ceil() as i64;
            let mut k = k0;
            loop {
                let x = self.x0 + (k as f64 + shift) * self.dx;
                if x > b + tol {
                    break;
                }
                xs.push(x);
                k += 1;
            }
        }
        xs.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(xs.len());
        for x in xs {
            match out.last() {
                Some(&l) if x - l < tol => {}
                _ => out.push(x),
            }
        }
        // Drop lattice points too close to an interval endpoint.
        let ends: Vec<f64> = ivs.iter().flat_map(|&(a, b)| [a, b]).collect();
        out.retain(|&x| {
            ends.iter().any(|&e| (x - e).abs() < tol) || ends.iter().all(|&e| (x - e).abs() > 0.2 * self.dx)
        });
        out
    }

    pub fn build(&self, tag: impl Fn(Point, Point) -> BoundaryTag, policy: CellPointPolicy) -> Result<TriMesh> {
        if self.strips.len() + 1 != self.rows.len() || self.dx <= 0.0 {
            return Err(Error::InvalidParameter(
                "strip lattice needs rows.len() == strips.len() + 1 and dx > 0".into(),
            ));
        }
        let tol = 1e-9 * self.dx;
        let mut points: Vec<Point> = Vec::new();
        let mut row_index: Vec<Vec<(f64, usize)>> = Vec::with_capacity(self.rows.len());
        for (j, &y) in self.rows.iter().enumerate() {
            let xs = self.row_points(j);
            let mut idx = Vec::with_capacity(xs.len());
            for x in xs {
                idx.push((x, points.len()));
                points.push([x, y]);
            }
            row_index.push(idx);
        }
        let mut tris: Vec<[usize; 3]> = Vec::new();
        for (j, ivs) in self.strips.iter().enumerate() {
            for &(a, b) in ivs {
                let pick = |row: &[(f64, usize)]| -> Vec<(f64, usize)> {
                    row.iter().copied().filter(|&(x, _)| x > a - tol && x < b + tol).collect()
                };
                let lo = pick(&row_index[j]);
                let up = pick(&row_index[j + 1]);
                let (mut i, mut k) = (0usize, 0usize);
                while i + 1 < lo.len() || k + 1 < up.len() {
                    // Take the shorter of the two candidate diagonals.
                    let advance_lower = k + 1 == up.len()
                        || (i + 1 < lo.len() && {
                            let d_lo = dist2(points[lo[i + 1].1], points[up[k].1]);
                            let d_up = dist2(points[lo[i].1], points[up[k + 1].1]);
                            d_lo < d_up - tol * tol
                        });
                    if advance_lower {
                        tris.push([lo[i].1, lo[i + 1].1, up[k].1]);
                        i += 1;
                    } else {
                        tris.push([lo[i].1, up[k + 1].1, up[k].1]);
                        k += 1;
                    }
                }
            }
        }
        let mut count = std::collections::HashMap::new();
        for t in &tris {
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        let mut boundary: Vec<(usize, usize, BoundaryTag)> =
            count.into_iter().filter(|&(_, c)| c == 1).map(|((a, b), _)| (a, b, tag(points[a], points[b]))).collect();
        boundary.sort_by_key(|&(a, b, _)| (a, b));
        TriMesh::from_arrays(points, tris, &boundary, policy)
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}
