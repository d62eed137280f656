//! Block three-term recurrence `A_m P^{m+1} + B_m(x) P^m + C_m P^{m-1} = 0`,
//! its sparse left inverse `D_m`, and Clenshaw evaluation.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::koornwinder::{block_indices, graded_indices, three_term_scalar, MultiIndex, ParamVector, RefPoint};
use crate::sparse::{OpCounter, RowSparse};

/// Pivots smaller than this are reported as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Which polynomials take part in the recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Every multi-index.
    Full,
    /// Indices with `l1 >= 2, l2 >= 1, l3 >= 1`, i.e. the interior modes.
    Interior,
}

impl Layout {
    pub fn min_index(self) -> [usize; 3] {
        match self {
            Layout::Full => [0, 0, 0],
            Layout::Interior => [2, 1, 1],
        }
    }

    pub fn min_degree(self) -> usize {
        self.min_index().iter().sum()
    }

    pub fn contains(self, l: MultiIndex) -> bool {
        let m = self.min_index();
        l.l1 >= m[0] && l.l2 >= m[1] && l.l3 >= m[2]
    }

    fn reduced(self, l: MultiIndex) -> MultiIndex {
        let m = self.min_index();
        MultiIndex::new(l.l1 - m[0], l.l2 - m[1], l.l3 - m[2])
    }

    /// Indices of total degree `m`, ordered by `l1` then `l2`.
    pub fn block(self, m: usize) -> Vec<MultiIndex> {
        let [a, b, c] = self.min_index();
        match m.checked_sub(self.min_degree()) {
            Some(r) => block_indices(r).into_iter().map(|l| MultiIndex::new(l.l1 + a, l.l2 + b, l.l3 + c)).collect(),
            None => Vec::new(),
        }
    }

    pub fn block_size(self, m: usize) -> usize {
        m.checked_sub(self.min_degree()).map_or(0, crate::koornwinder::block_size)
    }

    /// Position of `l` within its degree block.
    pub fn position(self, l: MultiIndex) -> usize {
        self.reduced(l).block_position()
    }
}

/// The blocks of one recurrence step. Rows are stacked by direction
/// `i = 1, 2, 3`, each holding `r_m` rows in block order, so that
/// `x_i P^m = A^i P^{m+1} + V^i P^m + C^i P^{m-1}`.
#[derive(Clone, Debug)]
pub struct RecurrenceMatrices {
    pub degree: usize,
    pub layout: Layout,
    pub params: ParamVector,
    /// `3 r_m x r_{m+1}`.
    pub a: RowSparse,
    /// `x`-independent part of `B_m`, `3 r_m x r_m`; `B_m(x) = V - [x_i I]`.
    pub v: RowSparse,
    /// `3 r_m x r_{m-1}`.
    pub c: RowSparse,
}

impl RecurrenceMatrices {
    pub fn rows_per_direction(&self) -> usize {
        self.layout.block_size(self.degree)
    }

    /// Residual `A P^{m+1} + B(x) P^m + C P^{m-1}` from block values.
    pub fn residual(&self, p: RefPoint, next: &[f64], cur: &[f64], prev: &[f64]) -> Vec<f64> {
        let mut ops = OpCounter::default();
        let r = self.rows_per_direction();
        let an = self.a.mul_vec(next, &mut ops);
        let vn = self.v.mul_vec(cur, &mut ops);
        let cn = self.c.mul_vec(prev, &mut ops);
        (0..3 * r).map(|row| an[row] + vn[row] - p.coord(row / r + 1) * cur[row % r] + cn[row]).collect()
    }
}

/// Relative size below which a coefficient leaking outside the layout counts as zero.
const LEAK_TOL: f64 = 1e-12;

/// Recurrence blocks over every multi-index.
pub fn build_recurrence(m: usize, a: ParamVector) -> RecurrenceMatrices {
    build_recurrence_in(Layout::Full, m, a).expect("the full layout is closed under the recurrence")
}

/// Recurrence blocks restricted to `layout`. Fails if a multiplication
/// reaches outside the layout with a nonzero coefficient.
pub fn build_recurrence_in(layout: Layout, m: usize, a: ParamVector) -> Result<RecurrenceMatrices> {
    let rp = m.checked_sub(1).map_or(0, |k| layout.block_size(k));
    let (r, rn) = (layout.block_size(m), layout.block_size(m + 1));
    let mut out = RecurrenceMatrices {
        degree: m,
        layout,
        params: a,
        a: RowSparse::zeros(3 * r, rn),
        v: RowSparse::zeros(3 * r, r),
        c: RowSparse::zeros(3 * r, rp),
    };
    for s in layout.block(m) {
        let ps = layout.position(s);
        for dir in 1..=3 {
            let row = (dir - 1) * r + ps;
            let terms = three_term_scalar(s, a, dir);
            let scale = terms.iter().fold(0.0_f64, |acc, t| acc.max(t.coeff.abs()));
            for t in terms {
                let target = t.target(s).filter(|&l| layout.contains(l));
                let Some(l) = target else {
                    if t.coeff.abs() > LEAK_TOL * scale {
                        return Err(Error::InvalidArgument(format!(
                            "recurrence for {s:?} leaves the layout with coefficient {:e}",
                            t.coeff
                        )));
                    }
                    continue;
                };
                let col = layout.position(l);
                match l.degree() {
                    d if d == m + 1 => out.a.add(row, col, t.coeff),
                    d if d == m => out.v.add(row, col, t.coeff),
                    _ => out.c.add(row, col, t.coeff),
                }
            }
        }
    }
    Ok(out)
}

/// Sparse left inverse `D_m` of `A_m`, `r_{m+1} x 3 r_m`.
#[derive(Clone, Debug)]
pub struct GeneralizedInverse {
    pub degree: usize,
    pub d: RowSparse,
}

fn pivot(value: f64, degree: usize, block: usize) -> Result<f64> {
    if value.abs() < PIVOT_TOL || !value.is_finite() {
        Err(Error::SingularPivot { degree, block, value })
    } else {
        Ok(value)
    }
}

/// Combines rows, dropping entries that cancel to rounding level.
fn combine(parts: &[(f64, &[(usize, f64)])]) -> Vec<(usize, f64)> {
    let mut acc: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    for &(s, row) in parts {
        for &(j, v) in row {
            let e = acc.entry(j).or_insert((0.0, 0.0));
            e.0 += s * v;
            e.1 += (s * v).abs();
        }
    }
    acc.into_iter().filter(|(_, (v, mag))| v.abs() > 1e-13 * mag).map(|(j, (v, _))| (j, v)).collect()
}

/// Builds `D_m` by eliminating along the directions: rows with `l3` above
/// the layout minimum invert an `x3` row, the remaining rows with `l2`
/// above the minimum invert an `x2` row, and the single corner row inverts
/// the `x1` row of the top `l1` index.
pub fn build_generalized_inverse(rec: &RecurrenceMatrices) -> Result<GeneralizedInverse> {
    let (m, layout) = (rec.degree, rec.layout);
    let r = rec.rows_per_direction();
    let next = layout.block(m + 1);
    let [_, min2, min3] = layout.min_index();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); next.len()];

    for &t in next.iter().filter(|t| t.l3 > min3) {
        let s = MultiIndex::new(t.l1, t.l2, t.l3 - 1);
        let col = 2 * r + layout.position(s);
        let piv = pivot(rec.a.get(col, layout.position(t)), m, t.l1)?;
        rows[layout.position(t)] = vec![(col, 1.0 / piv)];
    }

    let eliminate = |rows: &[Vec<(usize, f64)>], col: usize, t: MultiIndex| -> Result<Vec<(usize, f64)>> {
        let pt = layout.position(t);
        let piv = pivot(rec.a.get(col, pt), m, t.l1)?;
        let unit = [(col, 1.0)];
        let mut parts: Vec<(f64, &[(usize, f64)])> = vec![(1.0 / piv, &unit)];
        for &(u, v) in &rec.a.rows[col] {
            if u != pt {
                debug_assert!(!rows[u].is_empty(), "elimination order violated");
                parts.push((-v / piv, &rows[u]));
            }
        }
        Ok(combine(&parts))
    };

    for &t in next.iter().filter(|t| t.l3 == min3 && t.l2 > min2) {
        let s = MultiIndex::new(t.l1, t.l2 - 1, t.l3);
        let row = eliminate(&rows, r + layout.position(s), t)?;
        rows[layout.position(t)] = row;
    }

    let corner = *next.last().expect("blocks are nonempty above the minimum degree");
    debug_assert!(corner.l2 == min2 && corner.l3 == min3);
    let s = MultiIndex::new(corner.l1 - 1, corner.l2, corner.l3);
    let row = eliminate(&rows, layout.position(s), corner)?;
    rows[layout.position(corner)] = row;

    let inv = GeneralizedInverse { degree: m, d: RowSparse { ncols: 3 * r, rows } };
    debug_assert!(left_inverse_error(&inv, rec) < 1e-10);
    Ok(inv)
}

/// `max |D_m A_m - I|`.
pub fn left_inverse_error(inv: &GeneralizedInverse, rec: &RecurrenceMatrices) -> f64 {
    let prod = inv.d.matmul(&rec.a);
    let mut err = 0.0_f64;
    for (i, row) in prod.rows.iter().enumerate() {
        let mut diag = 0.0;
        for &(j, v) in row {
            if i == j {
                diag = v;
            } else {
                err = err.max(v.abs());
            }
        }
        err = err.max((diag - 1.0).abs());
    }
    err
}

/// Recurrence blocks and inverses for one family, built on first use.
#[derive(Debug)]
pub struct RecurrenceTable {
    layout: Layout,
    params: ParamVector,
    levels: Vec<OnceLock<Result<(RecurrenceMatrices, GeneralizedInverse)>>>,
}

impl RecurrenceTable {
    /// Table for degrees `0..=max_degree`.
    pub fn new(layout: Layout, params: ParamVector, max_degree: usize) -> Self {
        Self { layout, params, levels: (0..=max_degree).map(|_| OnceLock::new()).collect() }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> ParamVector {
        self.params
    }

    pub fn max_degree(&self) -> usize {
        self.levels.len() - 1
    }

    /// Blocks and inverse at degree `m`.
    pub fn level(&self, m: usize) -> Result<(&RecurrenceMatrices, &GeneralizedInverse)> {
        let cell = self
            .levels
            .get(m)
            .ok_or_else(|| Error::InvalidArgument(format!("degree {m} beyond table size {}", self.max_degree())))?;
        let entry = cell.get_or_init(|| {
            let rec = build_recurrence_in(self.layout, m, self.params)?;
            let inv = build_generalized_inverse(&rec)?;
            Ok((rec, inv))
        });
        match entry {
            Ok((rec, inv)) => Ok((rec, inv)),
            Err(e) => Err(e.clone()),
        }
    }
}

/// Coefficients of a full-layout expansion grouped by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionCoeffs {
    pub blocks: Vec<Vec<f64>>,
}

impl ExpansionCoeffs {
    pub fn zeros(max_degree: usize) -> Self {
        Self { blocks: (0..=max_degree).map(|m| vec![0.0; crate::koornwinder::block_size(m)]).collect() }
    }

    /// From coefficients listed in graded order.
    pub fn from_graded(max_degree: usize, coeffs: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(max_degree);
        if coeffs.len() != crate::koornwinder::graded_size(max_degree) {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                crate::koornwinder::graded_size(max_degree),
                coeffs.len()
            )));
        }
        for (l, &c) in graded_indices(max_degree).iter().zip(coeffs) {
            out.blocks[l.degree()][l.block_position()] = c;
        }
        Ok(out)
    }

    pub fn max_degree(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn set(&mut self, l: MultiIndex, c: f64) {
        self.blocks[l.degree()][l.block_position()] = c;
    }
}

/// Backward Clenshaw sweep over a cached recurrence table.
#[derive(Debug)]
pub struct Clenshaw {
    table: RecurrenceTable,
}

impl Clenshaw {
    pub fn new(params: ParamVector, max_degree: usize) -> Self {
        Self { table: RecurrenceTable::new(Layout::Full, params, max_degree + 1) }
    }

    /// Builds every level up front so later sweeps only read.
    pub fn prepare(&self) -> Result<()> {
        for m in 0..self.table.max_degree() {
            self.table.level(m)?;
        }
        Ok(())
    }

    pub fn eval(&self, coeffs: &ExpansionCoeffs, p: RefPoint) -> Result<f64> {
        self.eval_counted(coeffs, p, &mut OpCounter::default())
    }

    /// Evaluates and adds the sweep's multiply-adds to `ops`.
    pub fn eval_counted(&self, coeffs: &ExpansionCoeffs, p: RefPoint, ops: &mut OpCounter) -> Result<f64> {
        let big_m = coeffs.max_degree();
        if big_m >= self.table.max_degree() {
            return Err(Error::InvalidArgument(format!("expansion degree {big_m} exceeds the prepared table")));
        }
        // b^{m+1}, b^{m+2} and the reusable product D_{m+1}^T b^{m+2}
        let mut b_next: Vec<f64> = Vec::new();
        let mut d_next: Vec<f64> = Vec::new();
        for m in (0..=big_m).rev() {
            let mut b = coeffs.blocks[m].clone();
            if m < big_m {
                let (rec, inv) = self.table.level(m)?;
                let r = rec.rows_per_direction();
                let y = inv.d.tmul_vec(&b_next, ops);
                // b -= B_m(x)^T y = V^T y - sum_i x_i y_i
                rec.v.tmul_add(&y, -1.0, &mut b, ops);
                for i in 0..3 {
                    let xi = p.coord(i + 1);
                    for (bj, yj) in b.iter_mut().zip(&y[i * r..(i + 1) * r]) {
                        *bj += xi * yj;
                    }
                }
                ops.add(3 * r);
                if !d_next.is_empty() {
                    let (rec1, _) = self.table.level(m + 1)?;
                    rec1.c.tmul_add(&d_next, -1.0, &mut b, ops);
                }
                d_next = y;
            }
            b_next = b;
        }
        Ok(b_next[0])
    }
}

/// One-shot Clenshaw evaluation.
pub fn clenshaw_eval(coeffs: &ExpansionCoeffs, a: ParamVector, p: RefPoint) -> Result<f64> {
    Clenshaw::new(a, coeffs.max_degree()).eval(coeffs, p)
}
