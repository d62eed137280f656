//! Sparse storage: row-oriented operators for the recurrence blocks and a
//! symmetric coordinate matrix for assembled Galerkin systems.

use std::collections::BTreeMap;
use std::io::{self, Write};

use faer::Mat;

/// Running count of multiply-add operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter(pub u64);

impl OpCounter {
    #[inline]
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }
}

/// Rectangular sparse matrix stored row by row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowSparse {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl RowSparse {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { ncols, rows: vec![Vec::new(); nrows] }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// Adds `v` to entry `(i, j)`, keeping each row sorted by column.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j < self.ncols);
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => row[k].1 += v,
            Err(k) => row.insert(k, (j, v)),
        }
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[f64], ops: &mut OpCounter) -> Vec<f64> {
        ops.add(self.nnz());
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    /// `y = self^T * x`.
    pub fn tmul_vec(&self, x: &[f64], ops: &mut OpCounter) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tmul_add(x, 1.0, &mut y, ops);
        y
    }

    /// `y += s * self^T * x`.
    pub fn tmul_add(&self, x: &[f64], s: f64, y: &mut [f64], ops: &mut OpCounter) {
        for (r, &xi) in self.rows.iter().zip(x) {
            ops.add(r.len());
            let sx = s * xi;
            for &(j, v) in r {
                y[j] += v * sx;
            }
        }
    }

    /// Column counts of nonzero entries.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.ncols];
        for r in &self.rows {
            for &(j, _) in r {
                c[j] += 1;
            }
        }
        c
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows(), self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Product `self * other` with row-accumulated sparse output.
    pub fn matmul(&self, other: &RowSparse) -> RowSparse {
        let mut out = RowSparse::zeros(self.nrows(), other.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for &(k, a) in r {
                for &(j, b) in &other.rows[k] {
                    *acc.entry(j).or_insert(0.0) += a * b;
                }
            }
            out.rows[i] = acc.into_iter().collect();
        }
        out
    }
}

/// Symmetric sparse matrix holding the upper triangle in coordinate form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    upper: BTreeMap<(usize, usize), f64>,
}

impl SparseSymMatrix {
    pub const DROP_TOL: f64 = 1e-15;

    pub fn new(dim: usize) -> Self {
        Self { dim, upper: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `v` to `(i, j)` and, implicitly, to `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.upper.entry(key).or_insert(0.0) += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.upper.get(&key).copied().unwrap_or(0.0)
    }

    /// Removes entries whose magnitude is at most `tol` times the largest entry.
    pub fn prune(&mut self, tol: f64) {
        let scale = self.upper.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.upper.retain(|_, v| v.abs() > tol * scale);
    }

    /// Stored upper-triangle entries `(row, col, value)` with `row <= col`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Number of nonzeros of the full symmetric matrix.
    pub fn nnz(&self) -> usize {
        self.upper.keys().map(|&(i, j)| if i == j { 1 } else { 2 }).sum()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for v in self.upper.values_mut() {
            *v *= s;
        }
        self
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (i, j, v) in other.upper_entries() {
            *out.upper.entry((i, j)).or_insert(0.0) += s * v;
        }
        out
    }

    /// Compressed rows of the full symmetric matrix.
    pub fn to_rows(&self) -> RowSparse {
        let mut r = RowSparse::zeros(self.dim, self.dim);
        for (i, j, v) in self.upper_entries() {
            r.rows[i].push((j, v));
            if i != j {
                r.rows[j].push((i, v));
            }
        }
        for row in &mut r.rows {
            row.sort_by_key(|e| e.0);
        }
        r
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (i, j, v) in self.upper_entries() {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for (i, j, v) in self.upper_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Writes Matrix Market `coordinate real symmetric` (lower triangle, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.upper.len())?;
        let mut lower: Vec<_> = self.upper_entries().map(|(i, j, v)| (j, i, v)).collect();
        lower.sort_by_key(|&(i, j, _)| (j, i));
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}
