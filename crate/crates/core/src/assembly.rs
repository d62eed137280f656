//! Galerkin matrices. Stiffness and constant-coefficient mass entries are
//! exact through Dubiner orthogonality; variable coefficients go through a
//! block recursion seeded by quadrature.

use faer::Mat;
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::koornwinder::{
    dubiner_norm, graded_size, koornwinder_eval_all, Derivative, DubinerExpansion, MultiIndex, ParamVector,
};
use crate::modal::{dubiner_expansion, enumerate_modes, gradient_dubiner, interior_indices, ModeClass, ModeId};
use crate::quadrature::{boundary_rule, tet_rule};
use crate::recurrence::{Layout, RecurrenceTable};
use crate::sparse::{OpCounter, SparseSymMatrix};

/// Physical scalar field.
pub type Field<'a> = &'a (dyn Fn(Vector3<f64>) -> f64 + Sync);

/// Reaction coefficient `gamma`.
#[derive(Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    Field(Field<'a>),
}

impl std::fmt::Debug for Coefficient<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// Interior modes of degree at most `m`, in system order.
pub fn interior_modes(m: usize) -> Vec<ModeId> {
    interior_indices(m).into_iter().map(|index| ModeId { class: ModeClass::Interior, index }).collect()
}

/// Boundary modes of degree at most `m`, in system order.
pub fn boundary_modes(m: usize) -> Vec<ModeId> {
    enumerate_modes(m).into_iter().filter(|md| md.class != ModeClass::Interior).collect()
}

fn max_degree(modes: &[ModeId]) -> usize {
    modes.iter().map(|md| md.index.degree() + 1).max().unwrap_or(0)
}

/// `sum_w weight_w E_w diag(gamma) E_w^T` over Dubiner expansions, with
/// entries that cancel to rounding level removed.
fn weighted_gram(n: usize, degree: usize, parts: &[(f64, Vec<DubinerExpansion>)]) -> SparseSymMatrix {
    let size = graded_size(degree);
    let norms: Vec<f64> = crate::koornwinder::graded_indices(degree).into_iter().map(dubiner_norm).collect();
    let mut out = SparseSymMatrix::new(n);
    let mut value = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    for (weight, exps) in parts {
        if *weight == 0.0 {
            continue;
        }
        // columns: Dubiner index -> (mode, coefficient)
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
        for (i, e) in exps.iter().enumerate() {
            for &(l, c) in &e.terms {
                cols[l.graded_position()].push((i, c));
            }
        }
        for (i, e) in exps.iter().enumerate() {
            for &(l, c) in &e.terms {
                let k = l.graded_position();
                let s = weight * c * norms[k];
                for &(j, d) in cols[k].iter().filter(|(j, _)| *j >= i) {
                    if value[j] == 0.0 && magnitude[j] == 0.0 {
                        touched.push(j);
                    }
                    value[j] += s * d;
                    magnitude[j] += (s * d).abs();
                }
            }
            for &j in &touched {
                if value[j].abs() > 64.0 * f64::EPSILON * magnitude[j] {
                    out.add(i, j, value[j]);
                }
                value[j] = 0.0;
                magnitude[j] = 0.0;
            }
            touched.clear();
        }
    }
    out.prune(SparseSymMatrix::DROP_TOL);
    out
}

/// Weights of the six derivative pairings: `c_j = G_j . (G_1 + G_2 + G_3)`
/// for the axis directions and `-G_jk` for the difference directions.
pub fn stiffness_weights(t: &Tetrahedron) -> [(Derivative, f64); 6] {
    let g = t.metric();
    let row = |j: usize| g[(j, 0)] + g[(j, 1)] + g[(j, 2)];
    [
        (Derivative::D1, row(0)),
        (Derivative::D2, row(1)),
        (Derivative::D3, row(2)),
        (Derivative::D2Minus1, -g[(0, 1)]),
        (Derivative::D1Minus3, -g[(0, 2)]),
        (Derivative::D3Minus2, -g[(1, 2)]),
    ]
}

/// Exact stiffness matrix `(grad phi_i, grad phi_j)_T` over `modes`.
pub fn assemble_stiffness_modes(t: &Tetrahedron, modes: &[ModeId]) -> Result<SparseSymMatrix> {
    let scale = 6.0 * t.volume();
    let mut parts = Vec::with_capacity(6);
    for (which, w) in stiffness_weights(t) {
        let exps = modes.iter().map(|&md| gradient_dubiner(md, which)).collect::<Result<Vec<_>>>()?;
        parts.push((scale * w, exps));
    }
    Ok(weighted_gram(modes.len(), max_degree(modes), &parts))
}

/// Stiffness matrix over the interior modes of degree at most `m`.
pub fn assemble_stiffness(t: &Tetrahedron, m: usize) -> Result<SparseSymMatrix> {
    assemble_stiffness_modes(t, &interior_modes(m))
}

/// Exact `gamma * (phi_i, phi_j)_T` over `modes` for constant `gamma`.
pub fn assemble_mass_const_modes(t: &Tetrahedron, modes: &[ModeId], gamma: f64) -> SparseSymMatrix {
    let exps: Vec<_> = modes.iter().map(|&md| dubiner_expansion(md)).collect();
    weighted_gram(modes.len(), max_degree(modes), &[(6.0 * t.volume() * gamma, exps)])
}

pub fn assemble_mass_const(t: &Tetrahedron, m: usize, gamma: f64) -> SparseSymMatrix {
    assemble_mass_const_modes(t, &interior_modes(m), gamma)
}

/// Values of each mode at the given nodes, node-major.
pub fn mode_values_at(modes: &[ModeId], nodes: &[crate::koornwinder::RefPoint]) -> Vec<Vec<f64>> {
    let exps: Vec<_> = modes.iter().map(|&md| crate::modal::shape_expansion(md)).collect();
    let deg = max_degree(modes).saturating_sub(1);
    nodes
        .iter()
        .map(|&p| {
            let all = koornwinder_eval_all(deg, ParamVector::MINUS_ONE, p);
            exps.iter().map(|e| e.terms.iter().map(|&(l, c)| c * all[l.graded_position()]).sum()).collect()
        })
        .collect()
}

/// `(gamma phi_i, phi_j)_T` by a tet rule with `order` points per direction.
pub fn mass_by_quadrature(t: &Tetrahedron, modes: &[ModeId], gamma: Coefficient, order: usize) -> Result<Mat<f64>> {
    let rule = tet_rule(order)?;
    let vals = mode_values_at(modes, &rule.nodes);
    let n = modes.len();
    let scale = 6.0 * t.volume();
    let mut m = Mat::<f64>::zeros(n, n);
    for ((p, w), v) in rule.nodes.iter().zip(&rule.weights).zip(&vals) {
        let g = match gamma {
            Coefficient::Constant(c) => c,
            Coefficient::Field(f) => f(t.affine_map(*p)),
        };
        let s = scale * w * g;
        for j in 0..n {
            let sj = s * v[j];
            for i in 0..=j {
                m[(i, j)] += sj * v[i];
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(m)
}

/// `(grad phi_i, grad phi_j)_T` by a tet rule, using finite Dubiner
/// expansions of the reference partial derivatives.
pub fn stiffness_by_quadrature(t: &Tetrahedron, modes: &[ModeId], order: usize) -> Result<Mat<f64>> {
    let rule = tet_rule(order)?;
    let n = modes.len();
    let deg = max_degree(modes).saturating_sub(1);
    let dirs = [Derivative::D1, Derivative::D2, Derivative::D3];
    let grads: Vec<[DubinerExpansion; 3]> = modes
        .iter()
        .map(|&md| -> Result<[DubinerExpansion; 3]> {
            Ok([gradient_dubiner(md, dirs[0])?, gradient_dubiner(md, dirs[1])?, gradient_dubiner(md, dirs[2])?])
        })
        .collect::<Result<_>>()?;
    let g = t.metric();
    let scale = 6.0 * t.volume();
    let mut s = Mat::<f64>::zeros(n, n);
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let all = koornwinder_eval_all(deg, ParamVector::ZERO, *p);
        let d: Vec<[f64; 3]> = grads
            .iter()
            .map(|gr| gr.clone().map(|e| e.terms.iter().map(|&(l, c)| c * all[l.graded_position()]).sum()))
            .collect();
        for j in 0..n {
            for i in 0..=j {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc += g[(a, b)] * d[i][a] * d[j][b];
                    }
                }
                s[(i, j)] += scale * w * acc;
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            s[(j, i)] = s[(i, j)];
        }
    }
    Ok(s)
}

/// Dense row-major block used by the variable-coefficient recursion.
#[derive(Clone, Debug)]
struct Block {
    cols: usize,
    data: Vec<f64>,
}

impl Block {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { cols, data: vec![0.0; rows * cols] }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of the variable-coefficient mass assembly.
#[derive(Clone, Debug)]
pub struct VariableMass {
    pub matrix: SparseSymMatrix,
    /// Multiply-adds spent in the block recursion, seeds excluded.
    pub recursion_ops: u64,
    /// Multiply-adds spent computing the quadrature seeds.
    pub seed_ops: u64,
}

/// Variable-coefficient mass matrix over the interior modes of degree at
/// most `m` by the block recursion
/// `H_{m+1,k} = D_m [ (x_i P^m, P^k)_gamma - V^i H_{m,k} - C^i H_{m-1,k} ]_i`,
/// with `(x_i P^m, P^k)_gamma` expanded on the `k` side through the same
/// recurrence. Seeds `H_{4,k}`, `4 <= k <= 2m - 4`, come from quadrature
/// with `m + 4` points per direction.
pub fn assemble_mass_variable(t: &Tetrahedron, m: usize, gamma: Field) -> Result<VariableMass> {
    let layout = Layout::Interior;
    let lo = layout.min_degree();
    let n = interior_indices(m).len();
    if m < lo {
        return Ok(VariableMass { matrix: SparseSymMatrix::new(n), recursion_ops: 0, seed_ops: 0 });
    }
    let top = 2 * m - lo;
    let table = RecurrenceTable::new(layout, ParamVector::MINUS_ONE, top + 1);
    let r = |k: usize| layout.block_size(k);

    // seeds: one row of blocks H_{4,k}
    let mut seed_ops = OpCounter::default();
    let rule = tet_rule(m + 4)?;
    let scale = 6.0 * t.volume();
    let first = layout.block(lo);
    let mut current: Vec<Block> = (lo..=top).map(|k| Block::zeros(r(lo), r(k))).collect();
    let blocks: Vec<Vec<MultiIndex>> = (lo..=top).map(|k| layout.block(k)).collect();
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let all = koornwinder_eval_all(top, ParamVector::MINUS_ONE, *p);
        let s = scale * w * gamma(t.affine_map(*p));
        for (a, la) in first.iter().enumerate() {
            let sa = s * all[la.graded_position()];
            for (kk, blk) in blocks.iter().enumerate() {
                for (b, lb) in blk.iter().enumerate() {
                    *current[kk].at_mut(a, b) += sa * all[lb.graded_position()];
                }
                seed_ops.add(blk.len());
            }
        }
    }

    // H_{j,k} is kept for j in {deg - 1, deg}, k in deg..=2m - deg, indexed by k - deg
    let mut previous: Vec<Block> = Vec::new();
    let mut ops = OpCounter::default();
    let mut out_blocks: Vec<(usize, usize, Block)> = Vec::new();
    for k in lo..=m {
        out_blocks.push((lo, k, current[k - lo].clone()));
    }

    for deg in lo..m {
        let (rec_m, inv_m) = table.level(deg)?;
        let rm = r(deg);
        let prev_deg = deg - 1;
        // lookup of H_{deg,k} for any k in [deg, 2m - deg]
        let h_cur = |k: usize| -> &Block { &current[k - deg] };
        // H_{deg-1,k} for k in [deg - 1, 2m - deg + 1]
        let h_prev = |k: usize| -> Option<&Block> { previous.get(k.checked_sub(prev_deg)?) };
        let mut next: Vec<Block> = Vec::with_capacity(2 * m - 2 * deg - 1);
        for k in deg + 1..=2 * m - deg - 1 {
            let (rec_k, _) = table.level(k)?;
            let rk = r(k);
            // stacked right-hand side, 3 r_deg x r_k
            let mut stack = Block::zeros(3 * rm, rk);
            for i in 0..3 {
                // x_i on the k side: H_{deg,k+1} A^{iT} + H_{deg,k} V^{iT} + H_{deg,k-1} C^{iT}
                let parts: [(&crate::sparse::RowSparse, Option<&Block>); 3] = [
                    (&rec_k.a, Some(h_cur(k + 1))),
                    (&rec_k.v, Some(h_cur(k))),
                    (&rec_k.c, Some(h_cur(k - 1))),
                ];
                for (mat, h) in parts {
                    let Some(h) = h else { continue };
                    for p in 0..rk {
                        for &(q, v) in &mat.rows[i * rk + p] {
                            ops.add(rm);
                            for a in 0..rm {
                                *stack.at_mut(i * rm + a, p) += h.at(a, q) * v;
                            }
                        }
                    }
                }
                // - V^i_deg H_{deg,k} - C^i_deg H_{deg-1,k}
                for a in 0..rm {
                    let row = i * rm + a;
                    for &(q, v) in &rec_m.v.rows[row] {
                        ops.add(rk);
                        let h = h_cur(k);
                        for p in 0..rk {
                            *stack.at_mut(row, p) -= v * h.at(q, p);
                        }
                    }
                    if let Some(hp) = h_prev(k) {
                        for &(q, v) in &rec_m.c.rows[row] {
                            ops.add(rk);
                            for p in 0..rk {
                                *stack.at_mut(row, p) -= v * hp.at(q, p);
                            }
                        }
                    }
                }
            }
            // H_{deg+1,k} = D_deg stack
            let rn = r(deg + 1);
            let mut h = Block::zeros(rn, rk);
            for (a, drow) in inv_m.d.rows.iter().enumerate() {
                for &(q, v) in drow {
                    ops.add(rk);
                    for p in 0..rk {
                        *h.at_mut(a, p) += v * stack.at(q, p);
                    }
                }
            }
            next.push(h);
        }
        previous = std::mem::replace(&mut current, next);
        for k in deg + 1..=m {
            out_blocks.push((deg + 1, k, current[k - deg - 1].clone()));
        }
    }

    // scatter into system order
    let order = interior_indices(m);
    let pos: std::collections::HashMap<MultiIndex, usize> = order.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut matrix = SparseSymMatrix::new(n);
    for (a, b, blk) in &out_blocks {
        let (ra, rb) = (layout.block(*a), layout.block(*b));
        for (i, li) in ra.iter().enumerate() {
            for (j, lj) in rb.iter().enumerate() {
                let (pi, pj) = (pos[li], pos[lj]);
                if a == b && pi > pj {
                    continue;
                }
                let v = blk.at(i, j);
                if v != 0.0 {
                    matrix.add(pi, pj, v);
                }
            }
        }
    }
    matrix.prune(SparseSymMatrix::DROP_TOL);
    Ok(VariableMass { matrix, recursion_ops: ops.0, seed_ops: seed_ops.0 })
}

/// Load vector `(f, phi_i)_T` over `modes`.
pub fn assemble_load_modes(t: &Tetrahedron, modes: &[ModeId], f: Field, order: usize) -> Result<Vec<f64>> {
    let rule = tet_rule(order)?;
    let fv: Vec<f64> = rule.nodes.iter().map(|&p| f(t.affine_map(p))).collect();
    Ok(load_from_values(t, &rule.weights, &mode_values_at(modes, &rule.nodes), &fv))
}

/// `sum_q 6|T| w_q f_q phi_i(x_q)` from precomputed node values.
pub fn load_from_values(t: &Tetrahedron, weights: &[f64], mode_values: &[Vec<f64>], f_values: &[f64]) -> Vec<f64> {
    let scale = 6.0 * t.volume();
    let mut out = vec![0.0; mode_values.first().map_or(0, Vec::len)];
    for ((w, v), fq) in weights.iter().zip(mode_values).zip(f_values) {
        let s = scale * w * fq;
        for (o, vi) in out.iter_mut().zip(v) {
            *o += s * vi;
        }
    }
    out
}

/// Load vector over the interior modes with `m + 2` points per direction.
pub fn assemble_load(t: &Tetrahedron, m: usize, f: Field) -> Result<Vec<f64>> {
    assemble_load_modes(t, &interior_modes(m), f, m + 2)
}

/// Boundary part `u_b` of a lifted solution: coefficients over
/// `boundary_modes(m)` of the `L^2(boundary)` projection of `g`.
#[derive(Clone, Debug)]
pub struct BoundaryLift {
    pub modes: Vec<ModeId>,
    pub coeffs: Vec<f64>,
}

/// Projects `g` onto the span of the boundary modes using one global Gram
/// system over all four faces.
pub fn assemble_boundary(t: &Tetrahedron, m: usize, g: Field) -> Result<BoundaryLift> {
    let modes = boundary_modes(m);
    let n = modes.len();
    let nodes = boundary_rule(t, m + 2)?;
    let points: Vec<_> = nodes.iter().map(|b| b.point).collect();
    let vals = mode_values_at(&modes, &points);
    let mut gram = Mat::<f64>::zeros(n, n);
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for ((node, v), p) in nodes.iter().zip(&vals).zip(&points) {
        let gv = g(t.affine_map(*p));
        for j in 0..n {
            let wj = node.weight * v[j];
            rhs[(j, 0)] += wj * gv;
            for i in 0..=j {
                gram[(i, j)] += wj * v[i];
            }
        }
    }
    for j in 0..n {
        for i in 0..j {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let llt = gram
        .llt(faer::Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite { what: "boundary Gram matrix".into(), dim: n })?;
    let x = faer::linalg::solvers::Solve::solve(&llt, &rhs);
    Ok(BoundaryLift { modes, coeffs: (0..n).map(|i| x[(i, 0)]).collect() })
}

/// Band pattern in the `l1` grading of the interior ordering: nonzero
/// `l1`-block offsets, and within each block pair the offsets of the partial
/// degree `l1 + l2`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SparsityReport {
    /// Distinct `l1` differences (column minus row) over all nonzeros.
    pub block_offsets: Vec<i64>,
    /// Largest number of distinct `l2` differences within one block offset.
    pub max_sub_diagonals: usize,
    /// Largest `|delta(l1 + l2)|` over all nonzeros.
    pub max_partial_offset: i64,
    pub nnz: usize,
}

fn offsets(idx: &[MultiIndex], i: usize, j: usize) -> (i64, i64) {
    let (p, q) = (idx[i], idx[j]);
    (q.l1 as i64 - p.l1 as i64, q.l2 as i64 - p.l2 as i64)
}

pub fn sparsity_report(m: usize, a: &SparseSymMatrix) -> SparsityReport {
    use std::collections::{BTreeMap, BTreeSet};
    let idx = interior_indices(m);
    let mut sub: BTreeMap<i64, BTreeSet<i64>> = BTreeMap::new();
    let mut partial = 0;
    for (i, j, _) in a.upper_entries() {
        for (r, c) in [(i, j), (j, i)] {
            let (d1, d2) = offsets(&idx, r, c);
            sub.entry(d1).or_default().insert(d2);
            partial = partial.max((d1 + d2).abs());
        }
    }
    SparsityReport {
        block_offsets: sub.keys().copied().collect(),
        max_sub_diagonals: sub.values().map(BTreeSet::len).max().unwrap_or(0),
        max_partial_offset: partial,
        nnz: a.nnz(),
    }
}

/// Block offsets of the stiffness pattern (block penta-diagonal).
pub const STIFFNESS_BLOCK_OFFSETS: [i64; 5] = [-2, -1, 0, 1, 2];
/// Block offsets of the mass pattern (block tri-diagonal over even shifts).
pub const MASS_BLOCK_OFFSETS: [i64; 3] = [-2, 0, 2];
/// Half-width of the hepta-diagonal sub-block band in `l1 + l2`.
pub const SUB_BAND: i64 = 3;

/// Number of stored nonzeros outside the band pattern.
pub fn count_outside_band(m: usize, a: &SparseSymMatrix, block_offsets: &[i64], sub_band: i64) -> usize {
    let idx = interior_indices(m);
    a.upper_entries()
        .filter(|&(i, j, _)| {
            let (d1, d2) = offsets(&idx, i, j);
            !block_offsets.contains(&d1) || (d1 + d2).abs() > sub_band
        })
        .count()
}
