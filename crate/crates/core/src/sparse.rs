//! Compressed sparse row matrices and a sparse `LDLᵀ` factorization.
//!
//! The factorization has no pivoting; it is meant for symmetric positive
//! definite and symmetric quasi-definite matrices. Fill is limited by a
//! geometric nested-dissection ordering driven by one coordinate per row.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::mesh::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("zero pivot at row {0} during LDLᵀ factorization")]
    ZeroPivot(usize),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Coordinate-format accumulator. Duplicates are summed in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Triplets {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &(i, _, _) in &self.entries {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, keeping insertion order, then merge columns
        let mut pos = counts.clone();
        let mut cols = vec![0usize; self.entries.len()];
        let mut vals = vec![0.0; self.entries.len()];
        for &(i, j, v) in &self.entries {
            cols[pos[i]] = j;
            vals[pos[i]] = v;
            pos[i] += 1;
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            order.clear();
            order.extend(counts[i]..counts[i + 1]);
            order.sort_by_key(|&p| cols[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if cols[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    indices.push(cols[p]);
                    values.push(vals[p]);
                    last = cols[p];
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> CsrMatrix {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[p] * x[self.indices[p]];
            }
            *yi = s;
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate().take(self.nrows) {
            for p in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[p]] += self.values[p] * xi;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d
    }

    /// The block with rows in `[r0, r1)` and columns in `[c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> CsrMatrix {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in r0..r1 {
            for (j, v) in self.row(i) {
                if j >= c0 && j < c1 {
                    indices.push(j - c0);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: r1 - r0,
            ncols: c1 - c0,
            indptr,
            indices,
            values,
        }
    }

    /// Row-major dense copy, for tests and small oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[i * self.ncols + j] += v;
            }
        }
        d
    }

    /// Symmetric permutation `P A Pᵀ` where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> CsrMatrix {
        let n = self.nrows;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut t = Triplets::new(n, n);
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in self.row(old) {
                t.push(new, inv[j], v);
            }
        }
        t.to_csr()
    }
}

/// Nested-dissection ordering of the graph of `a`, splitting by the median
/// coordinate along the longer bounding-box axis. Returns `perm[new] = old`.
pub fn nested_dissection(a: &CsrMatrix, coords: &[Point]) -> Vec<usize> {
    let n = a.nrows;
    let mut out = Vec::with_capacity(n);
    let mut side = vec![0u8; n];
    let mut stack: Vec<Task> = vec![Task::Split((0..n).collect())];
    // explicit stack: emits leaves and separators in post-order
    while let Some(task) = stack.pop() {
        match task {
            Task::Emit(nodes) => out.extend(nodes),
            Task::Split(mut nodes) => {
                if nodes.len() <= 48 {
                    out.extend(nodes);
                    continue;
                }
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for &v in &nodes {
                    for d in 0..2 {
                        lo[d] = lo[d].min(coords[v][d]);
                        hi[d] = hi[d].max(coords[v][d]);
                    }
                }
                let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
                nodes.sort_by(|&u, &v| {
                    coords[u][axis]
                        .partial_cmp(&coords[v][axis])
                        .unwrap_or(core::cmp::Ordering::Equal)
                        .then(u.cmp(&v))
                });
                let mid = nodes.len() / 2;
                let (left, right) = nodes.split_at(mid);
                for &v in left {
                    side[v] = 1;
                }
                let mut sep = Vec::new();
                let mut rest = Vec::new();
                for &v in right {
                    if a.row(v).any(|(j, _)| side[j] == 1) {
                        sep.push(v);
                    } else {
                        rest.push(v);
                    }
                }
                for &v in left {
                    side[v] = 0;
                }
                if rest.is_empty() {
                    // degenerate split, no progress possible
                    out.extend(nodes);
                    continue;
                }
                stack.push(Task::Emit(sep));
                stack.push(Task::Split(rest));
                stack.push(Task::Split(left.to_vec()));
            }
        }
    }
    out
}

enum Task {
    Split(Vec<usize>),
    Emit(Vec<usize>),
}

/// Sparse `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factors symmetric `a`; only the lower triangle of each row is read.
    pub fn new(a: &CsrMatrix, perm: Vec<usize>) -> Result<LdlFactor, SparseError> {
        if a.nrows != a.ncols {
            return Err(SparseError::NotSquare(a.nrows, a.ncols));
        }
        let n = a.nrows;
        if perm.len() != n {
            return Err(SparseError::Dimension {
                expected: n,
                got: perm.len(),
            });
        }
        let c = a.permute_symmetric(&perm);

        // symbolic: elimination tree and column counts
        let none = usize::MAX;
        let mut parent = vec![none; n];
        let mut flag = vec![none; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (i0, _) in c.row(k) {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == none {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];

        // numeric, up-looking
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = none);
        lnz.iter_mut().for_each(|l| *l = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (i0, v) in c.row(k) {
                if i0 > k {
                    continue;
                }
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
                top += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(SparseError::ZeroPivot(perm[k]));
            }
        }
        Ok(LdlFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    /// Factors `a` with a nested-dissection ordering from `coords`.
    pub fn with_coords(a: &CsrMatrix, coords: &[Point]) -> Result<LdlFactor, SparseError> {
        LdlFactor::new(a, nested_dissection(a, coords))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(m: usize) -> (CsrMatrix, Vec<Point>) {
        let n = m * m;
        let mut t = Triplets::new(n, n);
        let mut coords = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let v = j * m + i;
                coords.push([i as f64, j as f64]);
                t.push(v, v, 4.0);
                if i > 0 {
                    t.push(v, v - 1, -1.0);
                }
                if i + 1 < m {
                    t.push(v, v + 1, -1.0);
                }
                if j > 0 {
                    t.push(v, v - m, -1.0);
                }
                if j + 1 < m {
                    t.push(v, v + m, -1.0);
                }
            }
        }
        (t.to_csr(), coords)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::new(2, 3);
        t.push(0, 2, 1.0);
        t.push(0, 0, 2.0);
        t.push(0, 2, 3.0);
        t.push(1, 1, -1.0);
        let a = t.to_csr();
        assert_eq!(a.indptr, vec![0, 2, 3]);
        assert_eq!(a.indices, vec![0, 2, 1]);
        assert_eq!(a.values, vec![2.0, 4.0, -1.0]);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![14.0, -2.0]);
        let mut z = vec![0.0; 3];
        a.matvec_transpose(&[1.0, 1.0], &mut z);
        assert_eq!(z, vec![2.0, -1.0, 4.0]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn ordering_is_a_permutation() {
        let (a, c) = laplacian_2d(30);
        let mut p = nested_dissection(&a, &c);
        p.sort_unstable();
        assert_eq!(p, (0..900).collect::<Vec<_>>());
    }

    #[test]
    fn ldl_solves_spd_and_quasidefinite() {
        let (a, c) = laplacian_2d(25);
        let f = LdlFactor::with_coords(&a, &c).unwrap();
        let x: Vec<f64> = (0..625).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut b = vec![0.0; 625];
        a.matvec(&x, &mut b);
        f.solve_in_place(&mut b);
        let err = x
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(err < 1e-10, "{err}");
        assert_eq!(f.negative_pivots(), 0);

        // [[A, B], [Bᵀ, -I]] with B = I
        let n = 625;
        let mut t = Triplets::new(2 * n, 2 * n);
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push(i, j, v);
            }
            t.push(i, n + i, 1.0);
            t.push(n + i, i, 1.0);
            t.push(n + i, n + i, -1.0);
        }
        let q = t.to_csr();
        let coords: Vec<Point> = c.iter().chain(c.iter()).copied().collect();
        let f = LdlFactor::with_coords(&q, &coords).unwrap();
        let x: Vec<f64> = (0..2 * n).map(|i| (i % 7) as f64).collect();
        let mut b = vec![0.0; 2 * n];
        q.matvec(&x, &mut b);
        f.solve_in_place(&mut b);
        let err = x
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        assert!(err < 1e-9, "{err}");
        assert_eq!(f.negative_pivots(), n);
    }

    #[test]
    fn zero_pivot_reported() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let a = t.to_csr();
        assert!(matches!(
            LdlFactor::new(&a, vec![0, 1]),
            Err(SparseError::ZeroPivot(0))
        ));
    }
}
