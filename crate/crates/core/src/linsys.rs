//! Sparse assembly and direct solves.
//!
//! Matrices are assembled from triplets into CSR. Factorization uses the
//! sparse LU of `faer`; the symbolic analysis is cached per sparsity pattern
//! by [`SparseLu`].

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

use crate::{Error, Result};

/// Triplet list accepting repeated entries.
#[derive(Clone, Debug, Default)]
pub struct AssemblyBuffer {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl AssemblyBuffer {
    pub fn new(n: usize) -> Self {
        AssemblyBuffer { n, ..Default::default() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        AssemblyBuffer {
            n,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        for k in 0..self.vals.len() {
            f(self.rows[k], self.cols[k], self.vals[k]);
        }
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.cols.clear();
        self.vals.clear();
    }

    /// Sums duplicates in sorted order, so the result does not depend on
    /// the order of pushes.
    pub fn finalize(&self) -> Result<CsrMatrix> {
        let n = self.n;
        for (&r, &c) in self.rows.iter().zip(&self.cols) {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { index: r.max(c), len: n });
            }
        }
        let mut order: Vec<usize> = (0..self.vals.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            (self.rows[a], self.cols[a]).cmp(&(self.rows[b], self.cols[b])).then(self.vals[a].total_cmp(&self.vals[b]))
        });
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let key = (self.rows[k], self.cols[k]);
            if last == Some(key) {
                *vals.last_mut().expect("entry exists") += self.vals[k];
            } else {
                col_idx.push(key.1);
                vals.push(self.vals[k]);
                row_ptr[key.0 + 1] += 1;
                last = Some(key);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix { n, row_ptr, col_idx, vals })
    }
}

/// Maps a fixed sequence of pushes onto a fixed CSR pattern.
///
/// Built once from a representative buffer; later buffers with the same
/// push sequence are assembled without sorting.
#[derive(Clone, Debug)]
pub struct AssemblyPlan {
    template: CsrMatrix,
    slots: Vec<usize>,
}

impl AssemblyPlan {
    pub fn new(buffer: &AssemblyBuffer) -> Result<Self> {
        let mut template = buffer.finalize()?;
        template.vals.iter_mut().for_each(|v| *v = 0.0);
        let slots = buffer
            .rows
            .iter()
            .zip(&buffer.cols)
            .map(|(&r, &c)| template.slot(r, c).expect("entry present in pattern"))
            .collect();
        Ok(AssemblyPlan { template, slots })
    }

    /// Whether `buffer` has the push sequence this plan was built from.
    pub fn matches(&self, buffer: &AssemblyBuffer) -> bool {
        buffer.n == self.template.n
            && buffer.len() == self.slots.len()
            && buffer.rows.iter().zip(&buffer.cols).zip(&self.slots).all(|((&r, &c), &s)| {
                self.template.col_idx[s] == c && self.template.row_ptr[r] <= s && s < self.template.row_ptr[r + 1]
            })
    }

    /// Accumulates in push order. The caller guarantees the push sequence.
    pub fn assemble(&self, buffer: &AssemblyBuffer) -> Result<CsrMatrix> {
        if buffer.len() != self.slots.len() || buffer.n != self.template.n {
            return Err(Error::DimensionMismatch { expected: self.slots.len(), got: buffer.len() });
        }
        let mut m = self.template.clone();
        for (&s, &v) in self.slots.iter().zip(&buffer.vals) {
            m.vals[s] += v;
        }
        Ok(m)
    }
}

/// Square matrix in compressed sparse row storage with sorted columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        CsrMatrix { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), vals: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    /// Stored value, zero if outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.slot(r, c).map_or(0.0, |s| self.vals[s])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Sparse LU with the symbolic analysis cached for one pattern.
pub struct SparseLu {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// CSR slot to CSC slot.
    csc_of: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut col_ptr = vec![0usize; n + 1];
        for &c in &a.col_idx {
            col_ptr[c + 1] += 1;
        }
        for i in 0..n {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; a.nnz()];
        let mut csc_of = vec![0usize; a.nnz()];
        for r in 0..n {
            for s in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[s];
                row_idx[next[c]] = r;
                csc_of[s] = next[c];
                next[c] += 1;
            }
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|_| Error::SingularMatrix)?;
        Ok(SparseLu { n, row_ptr: a.row_ptr.clone(), col_idx: a.col_idx.clone(), col_ptr, row_idx, csc_of, symbolic })
    }

    pub fn matches(&self, a: &CsrMatrix) -> bool {
        self.n == a.n && self.row_ptr == a.row_ptr && self.col_idx == a.col_idx
    }

    /// Factorizes `a` (same pattern as at construction) and solves `a x = b`.
    ///
    /// One step of iterative refinement is applied when the first residual
    /// exceeds `max(1e-10, 1e-12 |b|)`.
    pub fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        if !self.matches(a) {
            return Err(Error::DimensionMismatch { expected: self.row_idx.len(), got: a.nnz() });
        }
        let mut csc = vec![0.0; a.nnz()];
        for (s, &v) in a.vals.iter().enumerate() {
            csc[self.csc_of[s]] = v;
        }
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &csc);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat).map_err(|_| Error::SingularMatrix)?;
        let mut x = b.to_vec();
        lu.solve_in_place(faer::ColMut::from_slice_mut(&mut x));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        let bound = 1e-10f64.max(1e-12 * inf_norm(b));
        let mut r = residual(a, &x, b);
        let mut rn = inf_norm(&r);
        if rn > bound {
            lu.solve_in_place(faer::ColMut::from_slice_mut(&mut r));
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
            rn = inf_norm(&residual(a, &x, b));
            if !rn.is_finite() {
                return Err(Error::SingularMatrix);
            }
            if rn > bound {
                return Err(Error::InaccurateSolve { residual: rn, bound });
            }
        }
        Ok(x)
    }
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, b)| b - ax).collect()
}

/// One-shot direct solve.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, got: b.len() });
    }
    SparseLu::new(a)?.solve(a, b)
}
