//! Koornwinder polynomials on the reference tetrahedron and their finite
//! expansion identities (parameter raising, derivatives, multiplication by a
//! coordinate).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jacobi::{
    demotion_e, derivative_coeff, jacobi_homogeneous_all, jacobi_norm, promotion_b,
    promotion_coeffs, demotion_coeffs, three_term_coeffs, JacobiParams,
};

/// Expansion coefficients below this magnitude are dropped.
pub const DROP_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl MultiIndex {
    pub const fn new(l1: usize, l2: usize, l3: usize) -> Self {
        Self { l1, l2, l3 }
    }

    pub fn degree(self) -> usize {
        self.l1 + self.l2 + self.l3
    }

    /// `l1 + l2`.
    pub fn partial(self) -> usize {
        self.l1 + self.l2
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.l1, self.l2, self.l3]
    }

    /// `self + offset`, or `None` when a component would be negative.
    pub fn shifted(self, offset: [i64; 3]) -> Option<Self> {
        let c = |l: usize, o: i64| usize::try_from(l as i64 + o).ok();
        Some(Self::new(c(self.l1, offset[0])?, c(self.l2, offset[1])?, c(self.l3, offset[2])?))
    }

    /// Position inside the degree block `P^m`, ordered by `l1` then `l2`.
    pub fn block_position(self) -> usize {
        let m = self.degree();
        let k = self.l1;
        k * (m + 1) - k * (k.saturating_sub(1)) / 2 + self.l2
    }

    /// Position in the stacked vector `[P^0; P^1; ...]`.
    pub fn graded_position(self) -> usize {
        let m = self.degree();
        m * (m + 1) * (m + 2) / 6 + self.block_position()
    }
}

/// `r_m`, the number of indices of total degree `m`.
pub fn block_size(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// `d_M`, the number of indices of total degree at most `m`.
pub fn graded_size(m: usize) -> usize {
    (m + 1) * (m + 2) * (m + 3) / 6
}

/// Indices of total degree `m` in block order.
pub fn block_indices(m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(block_size(m));
    for l1 in 0..=m {
        for l2 in 0..=m - l1 {
            out.push(MultiIndex::new(l1, l2, m - l1 - l2));
        }
    }
    out
}

/// Indices of total degree at most `m`, degree-major.
pub fn graded_indices(m: usize) -> Vec<MultiIndex> {
    (0..=m).flat_map(block_indices).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamVector(pub [f64; 4]);

impl ParamVector {
    pub const MINUS_ONE: Self = Self([-1.0; 4]);
    pub const ZERO: Self = Self([0.0; 4]);

    pub fn new(a: [f64; 4]) -> Result<Self> {
        for &value in &a {
            if !(value >= -1.0) {
                return Err(Error::ParameterDomain { value });
            }
        }
        Ok(Self(a))
    }

    pub fn raised(self, slot: usize) -> Self {
        let mut a = self.0;
        a[slot] += 1.0;
        Self(a)
    }

    fn first(self) -> JacobiParams {
        JacobiParams::raw(self.0[0], self.0[1])
    }

    /// Parameters of the second factor for first index `l1`.
    fn second(self, l1: usize) -> JacobiParams {
        JacobiParams::raw(2.0 * l1 as f64 + self.0[0] + self.0[1] + 1.0, self.0[2])
    }

    /// Parameters of the third factor for `l1 + l2 = partial`.
    fn third(self, partial: usize) -> JacobiParams {
        let s = self.0[0] + self.0[1] + self.0[2];
        JacobiParams::raw(2.0 * partial as f64 + s + 2.0, self.0[3])
    }
}

/// `max(floor(-x), 0)`.
pub fn chi(x: f64) -> usize {
    (-x).floor().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefPoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl RefPoint {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn coord(self, i: usize) -> f64 {
        [self.x1, self.x2, self.x3][i - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapsedPoint {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
}

pub fn collapse(p: RefPoint) -> Result<CollapsedPoint> {
    let v1 = 1.0 - p.x2 - p.x3;
    let v2 = 1.0 - p.x3;
    if v1 <= 0.0 || v2 <= 0.0 {
        return Err(Error::CollapsedSingularity { x1: p.x1, x2: p.x2, x3: p.x3 });
    }
    Ok(CollapsedPoint { xi: 2.0 * p.x1 / v1 - 1.0, eta: 2.0 * p.x2 / v2 - 1.0, zeta: 2.0 * p.x3 - 1.0 })
}

pub fn expand(c: CollapsedPoint) -> RefPoint {
    let x3 = (1.0 + c.zeta) / 2.0;
    let x2 = (1.0 + c.eta) / 2.0 * (1.0 - x3);
    let x1 = (1.0 + c.xi) / 2.0 * (1.0 - x2 - x3);
    RefPoint::new(x1, x2, x3)
}

/// The three homogenized pairs `(u, v)` with `v^k J_k(u / v)` giving the
/// weighted factors; the third factor has `v = 1`.
fn homogeneous_pairs(p: RefPoint) -> [(f64, f64); 3] {
    let v1 = 1.0 - p.x2 - p.x3;
    let v2 = 1.0 - p.x3;
    [(2.0 * p.x1 - v1, v1), (2.0 * p.x2 - v2, v2), (2.0 * p.x3 - 1.0, 1.0)]
}

/// Evaluates `J_l^a(p)`; exact on the closed tetrahedron.
pub fn koornwinder_eval(l: MultiIndex, a: ParamVector, p: RefPoint) -> f64 {
    let [(u1, v1), (u2, v2), (z, _)] = homogeneous_pairs(p);
    let f1 = jacobi_homogeneous_all(l.l1, a.first(), u1, v1)[l.l1];
    let f2 = jacobi_homogeneous_all(l.l2, a.second(l.l1), u2, v2)[l.l2];
    let f3 = jacobi_homogeneous_all(l.l3, a.third(l.partial()), z, 1.0)[l.l3];
    f1 * f2 * f3
}

/// All `J_l^a(p)` with `|l| <= n`, in graded order.
pub fn koornwinder_eval_all(n: usize, a: ParamVector, p: RefPoint) -> Vec<f64> {
    let [(u1, v1), (u2, v2), (z, _)] = homogeneous_pairs(p);
    let first = jacobi_homogeneous_all(n, a.first(), u1, v1);
    let second: Vec<Vec<f64>> =
        (0..=n).map(|l1| jacobi_homogeneous_all(n - l1, a.second(l1), u2, v2)).collect();
    let third: Vec<Vec<f64>> =
        (0..=n).map(|s| jacobi_homogeneous_all(n - s, a.third(s), z, 1.0)).collect();
    let mut out = Vec::with_capacity(graded_size(n));
    for m in 0..=n {
        for l1 in 0..=m {
            for l2 in 0..=m - l1 {
                out.push(first[l1] * second[l1][l2] * third[l1 + l2][m - l1 - l2]);
            }
        }
    }
    out
}

/// `gamma_l^a`, the squared weighted norm of `J_l^a`.
pub fn ortho_norm(l: MultiIndex, a: ParamVector) -> Result<f64> {
    let [a0, a1, a2, a3] = a.0;
    if l.l1 < chi(a0) + chi(a1) || l.l2 < chi(a2) || l.l3 < chi(a3) {
        return Err(Error::OutsideOrthogonalityWindow { index: l.as_array(), params: a.0 });
    }
    Ok(jacobi_norm(l.l1, a.first())?
        * jacobi_norm(l.l2, a.second(l.l1))?
        * jacobi_norm(l.l3, a.third(l.partial()))?)
}

/// `J_l^a = sum coeff * J_{l + offset}` in some other family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionTerm {
    pub offset: [i64; 3],
    pub coeff: f64,
}

impl ExpansionTerm {
    pub fn target(&self, l: MultiIndex) -> Option<MultiIndex> {
        l.shifted(self.offset)
    }
}

/// One-dimensional rewrites of `w(z) J_k^{a,b}(z)` in a neighbouring family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Identity,
    /// Into `(a+1, b)`.
    RaiseA,
    /// Into `(a, b+1)`.
    RaiseB,
    /// Into `(a+2, b)`.
    RaiseA2,
    /// `(1-z)/2` times, into `(a-1, b)`.
    LowerA,
    /// `((1-z)/2)^2` times, into `(a-2, b)`.
    LowerA2,
    /// `(1-z)/2` times, same family.
    TimesMinus,
    /// `(1+z)/2` times, same family.
    TimesPlus,
}

impl Op {
    /// The rewrite changing the first parameter by `delta` while absorbing
    /// `power` factors of `(1-z)/2`.
    fn fit(delta: i64, power: i64) -> Op {
        match (delta, power) {
            (0, 0) => Op::Identity,
            (1, 0) => Op::RaiseA,
            (2, 0) => Op::RaiseA2,
            (-1, 1) => Op::LowerA,
            (0, 1) => Op::TimesMinus,
            (-2, 2) => Op::LowerA2,
            _ => unreachable!("no one-dimensional rewrite for shift {delta} with weight power {power}"),
        }
    }

    /// `(new degree, coefficient)` pairs.
    fn apply(self, k: i64, p: JacobiParams) -> Vec<(i64, f64)> {
        let (a, b) = (p.alpha, p.beta);
        match self {
            Op::Identity => vec![(k, 1.0)],
            Op::RaiseA => {
                let (b1, b2) = promotion_b(k, p);
                vec![(k, b1), (k - 1, b2)]
            }
            Op::RaiseB => {
                let (b1, _) = promotion_b(k, p);
                let (_, b2) = promotion_b(k, p.swapped());
                vec![(k, b1), (k - 1, -b2)]
            }
            Op::RaiseA2 => {
                let c = promotion_coeffs(k, p);
                vec![(k, c.c1), (k - 1, c.c2), (k - 2, c.c3)]
            }
            Op::LowerA => {
                let (e1, e2) = demotion_e(k, JacobiParams::raw(a - 1.0, b));
                vec![(k, e1), (k + 1, e2)]
            }
            Op::LowerA2 => {
                let g = demotion_coeffs(k, JacobiParams::raw(a - 2.0, b));
                vec![(k + 2, g.g1), (k + 1, g.g2), (k, g.g3)]
            }
            Op::TimesMinus => {
                let t = three_term_coeffs(k, p);
                vec![(k + 1, -t.a1 / 2.0), (k, (1.0 - t.a2) / 2.0), (k - 1, -t.a3 / 2.0)]
            }
            Op::TimesPlus => {
                let t = three_term_coeffs(k, p);
                vec![(k + 1, t.a1 / 2.0), (k, (1.0 + t.a2) / 2.0), (k - 1, t.a3 / 2.0)]
            }
        }
    }
}

/// How the second or third factor is rewritten.
#[derive(Clone, Copy)]
enum Step {
    Fixed(Op),
    /// Chosen from the parameter shift and the available weight power.
    Fit,
}

/// Rewrites `w * J_l^from` in the family `to`, where `w` contributes
/// `extra_psi` factors of `(1-eta)/2` and `extra_omega` factors of
/// `(1-zeta)/2` on top of the first-factor operation `xi`.
fn compose(
    l: MultiIndex,
    from: ParamVector,
    to: ParamVector,
    xi: Op,
    eta: Step,
    zeta: Step,
    extra_psi: i64,
    extra_omega: i64,
) -> Vec<ExpansionTerm> {
    let (l1, l2, l3) = (l.l1 as i64, l.l2 as i64, l.l3 as i64);
    let par = |p: JacobiParams| p.alpha;
    let mut out = Vec::new();
    for (n1, c1) in xi.apply(l1, from.first()) {
        if n1 < 0 || c1 == 0.0 {
            continue;
        }
        let have = from.second(l.l1);
        let need = to.second(n1 as usize);
        let op2 = match eta {
            Step::Fixed(op) => op,
            Step::Fit => Op::fit((par(need) - par(have)).round() as i64, l1 + extra_psi - n1),
        };
        for (n2, c2) in op2.apply(l2, have) {
            if n2 < 0 || c2 == 0.0 {
                continue;
            }
            let have = from.third(l.partial());
            let need = to.third((n1 + n2) as usize);
            let op3 = match zeta {
                Step::Fixed(op) => op,
                Step::Fit => {
                    Op::fit((par(need) - par(have)).round() as i64, l1 + l2 + extra_omega - n1 - n2)
                }
            };
            for (n3, c3) in op3.apply(l3, have) {
                if n3 < 0 || c3 == 0.0 {
                    continue;
                }
                out.push(ExpansionTerm { offset: [n1 - l1, n2 - l2, n3 - l3], coeff: c1 * c2 * c3 });
            }
        }
    }
    merge_terms(out)
}

fn merge_terms(terms: Vec<ExpansionTerm>) -> Vec<ExpansionTerm> {
    let mut acc: BTreeMap<[i64; 3], f64> = BTreeMap::new();
    for t in terms {
        *acc.entry(t.offset).or_insert(0.0) += t.coeff;
    }
    acc.into_iter()
        .filter(|(_, c)| c.abs() > DROP_TOL)
        .map(|(offset, coeff)| ExpansionTerm { offset, coeff })
        .collect()
}

/// Expansion of `J_l^a` in the family with parameter `slot` raised by one.
pub fn promote_param(l: MultiIndex, a: ParamVector, slot: usize) -> Vec<ExpansionTerm> {
    let to = a.raised(slot);
    match slot {
        0 => compose(l, a, to, Op::RaiseA, Step::Fit, Step::Fit, 0, 0),
        1 => compose(l, a, to, Op::RaiseB, Step::Fit, Step::Fit, 0, 0),
        2 => compose(l, a, to, Op::Identity, Step::Fixed(Op::RaiseB), Step::Fit, 0, 0),
        3 => compose(l, a, to, Op::Identity, Step::Fit, Step::Fixed(Op::RaiseB), 0, 0),
        _ => panic!("parameter slot {slot} out of range"),
    }
}

/// Expansion of `x_dir * J_l^a` in the same family, `dir` in 1..=3.
pub fn three_term_scalar(l: MultiIndex, a: ParamVector, dir: usize) -> Vec<ExpansionTerm> {
    match dir {
        1 => compose(l, a, a, Op::TimesPlus, Step::Fit, Step::Fit, 1, 1),
        2 => compose(l, a, a, Op::Identity, Step::Fixed(Op::TimesPlus), Step::Fit, 0, 1),
        3 => compose(l, a, a, Op::Identity, Step::Fit, Step::Fixed(Op::TimesPlus), 0, 0),
        _ => panic!("direction {dir} out of range"),
    }
}

/// A finite combination of Koornwinder polynomials of one family.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub params: ParamVector,
    pub terms: Vec<(MultiIndex, f64)>,
}

/// An expansion in the `L^2`-orthogonal family `a = (0, 0, 0, 0)`.
pub type DubinerExpansion = Expansion;

impl Expansion {
    pub fn new(params: ParamVector, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Self {
        let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (l, c) in terms {
            *acc.entry(l).or_insert(0.0) += c;
        }
        let terms = acc.into_iter().filter(|(_, c)| c.abs() > DROP_TOL).collect();
        Self { params, terms }
    }

    pub fn single(params: ParamVector, l: MultiIndex) -> Self {
        Self { params, terms: vec![(l, 1.0)] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, p: RefPoint) -> f64 {
        self.terms.iter().map(|&(l, c)| c * koornwinder_eval(l, self.params, p)).sum()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self
    }

    /// Rewrites the expansion with parameter `slot` raised by one.
    pub fn promote(&self, slot: usize) -> Self {
        let terms = self.terms.iter().flat_map(|&(l, c)| {
            promote_param(l, self.params, slot)
                .into_iter()
                .filter_map(move |t| t.target(l).map(|k| (k, c * t.coeff)))
        });
        Self::new(self.params.raised(slot), terms.collect::<Vec<_>>())
    }

    /// Raises every parameter still at `-1` up to `0`.
    pub fn into_dubiner(self) -> DubinerExpansion {
        let mut e = self;
        for slot in 0..4 {
            if e.params.0[slot] == -1.0 {
                e = e.promote(slot);
            }
        }
        debug_assert!(e.params == ParamVector::ZERO);
        e
    }

    /// `L^2(T^)` inner product of two Dubiner expansions.
    pub fn l2_inner(&self, other: &Self) -> f64 {
        debug_assert!(self.params == ParamVector::ZERO && other.params == ParamVector::ZERO);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < self.terms.len() && j < other.terms.len() {
            let (li, ci) = self.terms[i];
            let (lj, cj) = other.terms[j];
            match li.cmp(&lj) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += ci * cj * dubiner_norm(li);
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }
}

/// `gamma_l` for the Dubiner family, always defined.
pub fn dubiner_norm(l: MultiIndex) -> f64 {
    ortho_norm(l, ParamVector::ZERO).expect("Dubiner norms are always defined")
}

/// Expansion of `J_l^{-1,-1,-1,-1}` in the Dubiner family.
pub fn raise_all_params(l: MultiIndex) -> DubinerExpansion {
    Expansion::single(ParamVector::MINUS_ONE, l).into_dubiner()
}

/// Derivative directions with finite Koornwinder expansions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Derivative {
    D1,
    D2,
    D2Minus1,
    D3,
    D1Minus3,
    D3Minus2,
}

impl Derivative {
    pub const ALL: [Derivative; 6] = [
        Derivative::D1,
        Derivative::D2,
        Derivative::D2Minus1,
        Derivative::D3,
        Derivative::D1Minus3,
        Derivative::D3Minus2,
    ];

    /// Parameter slots raised in the target family.
    pub fn raised_slots(self) -> [usize; 2] {
        match self {
            Derivative::D1 => [0, 1],
            Derivative::D2 => [0, 2],
            Derivative::D2Minus1 => [1, 2],
            Derivative::D3 => [0, 3],
            Derivative::D1Minus3 => [1, 3],
            Derivative::D3Minus2 => [2, 3],
        }
    }

    pub fn target_family(self, a: ParamVector) -> ParamVector {
        let [s, t] = self.raised_slots();
        a.raised(s).raised(t)
    }

    /// Weights of `(d/dx1, d/dx2, d/dx3)` forming this direction.
    pub fn gradient_weights(self) -> [f64; 3] {
        match self {
            Derivative::D1 => [1.0, 0.0, 0.0],
            Derivative::D2 => [0.0, 1.0, 0.0],
            Derivative::D2Minus1 => [-1.0, 1.0, 0.0],
            Derivative::D3 => [0.0, 0.0, 1.0],
            Derivative::D1Minus3 => [1.0, 0.0, -1.0],
            Derivative::D3Minus2 => [0.0, -1.0, 1.0],
        }
    }
}

/// Expansion of a first derivative of `J_l^a` in
/// `Derivative::target_family(a)`.
pub fn derivative_expansion(l: MultiIndex, a: ParamVector, which: Derivative) -> Result<Vec<ExpansionTerm>> {
    let [a0, a1, a2, a3] = a.0;
    let (l1, l2, l3) = (l.l1 as i64, l.l2 as i64, l.l3 as i64);
    let jp = JacobiParams::raw;
    let s1 = 2.0 * l1 as f64 + a0 + a1; // second-factor parameter is s1 + 1
    let s2 = 2.0 * (l1 + l2) as f64 + a0 + a1 + a2; // third-factor parameter is s2 + 2
    let d = |k: i64, p: JacobiParams| derivative_coeff(k, p);
    let b1 = |k: i64, p: JacobiParams| promotion_b(k, p).0;
    let b2 = |k: i64, p: JacobiParams| promotion_b(k, p).1;
    let e1 = |k: i64, p: JacobiParams| demotion_e(k, p).0;
    let e2 = |k: i64, p: JacobiParams| demotion_e(k, p).1;
    let vanishing = || Error::VanishingDenominator { index: l.as_array(), params: a.0 };
    let checked = |den: f64| if den.abs() < 1e-14 { Err(vanishing()) } else { Ok(den) };

    let p01 = jp(a0, a1);
    let p10 = jp(a1, a0);
    let eta = jp(s1 + 1.0, a2);
    let zeta = jp(s2 + 2.0, a3);
    let fl1 = l1 as f64;
    let fl2 = l2 as f64;
    let rho = 2.0 * d(l1, p01) * e1(l1 - 1, jp(a1, a0 + 1.0)) - fl1 * b2(l1, p01);
    let kappa = fl1 * b2(l1, p10) - 2.0 * d(l1, p01) * e1(l1 - 1, jp(a0, a1 + 1.0));
    let theta = 2.0 * d(l2, eta) * e1(l2 - 1, jp(a2, s1 + 2.0)) - fl2 * b2(l2, eta);

    let mut terms: Vec<ExpansionTerm> = Vec::new();
    let mut push = |offset: [i64; 3], coeff: f64| terms.push(ExpansionTerm { offset, coeff });
    match which {
        Derivative::D1 => push([-1, 0, 0], 2.0 * d(l1, p01)),
        Derivative::D2 | Derivative::D2Minus1 => {
            push([0, -1, 0], 2.0 * d(l2, eta) * b1(l1, p01));
            if l1 >= 1 {
                let den = checked(b1(l2, jp(s1, a2 + 1.0)))?;
                let tail = 2.0 * d(l2, eta) * e2(l2 - 1, jp(s1 + 1.0, a2 + 1.0));
                let num = if which == Derivative::D2 {
                    rho * b1(l2, eta) + tail * b2(l1, p01)
                } else {
                    kappa * b1(l2, eta) - tail * b2(l1, p10)
                };
                push([-1, 0, 0], num / den);
            }
        }
        Derivative::D3 | Derivative::D1Minus3 => {
            let sign = if which == Derivative::D3 { 1.0 } else { -1.0 };
            let dz = 2.0 * d(l3, zeta);
            let ez = e2(l3 - 1, jp(s2 + 2.0, a3 + 1.0));
            push([0, 0, -1], sign * dz * b1(l1, p01) * b1(l2, eta));
            if l2 >= 1 {
                let den = checked(b1(l3, jp(s2 + 1.0, a3 + 1.0)))?;
                let num = b1(l1, p01) * theta * b1(l3, zeta) + dz * b1(l1, p01) * b2(l2, eta) * ez;
                push([0, -1, 0], sign * num / den);
            }
            if l1 >= 1 {
                let lower = if which == Derivative::D3 { b2(l1, p01) } else { b2(l1, p10) };
                push([-1, 1, -1], dz * lower * e2(l2, jp(s1, a2)));
                let den = checked(b1(l2, jp(s1, a2)))? * checked(b1(l3, jp(s2 + 1.0, a3 + 1.0)))?;
                let lead = if which == Derivative::D3 {
                    rho + lower * e2(l2 - 1, eta) * theta
                } else {
                    lower * e2(l2 - 1, eta) * theta - kappa
                };
                let num = lead * b1(l3, zeta) + 2.0 * b1(l2, jp(s1, a2)) * d(l3, zeta) * lower * e1(l2, jp(s1, a2)) * ez;
                push([-1, 0, 0], num / den);
            }
        }
        Derivative::D3Minus2 => {
            push([0, 0, -1], 2.0 * d(l3, zeta) * b1(l2, eta));
            if l2 >= 1 {
                let den = checked(b1(l3, jp(s2 + 1.0, a3 + 1.0)))?;
                let swapped = jp(a2, s1 + 1.0);
                let num = (fl2 * b2(l2, swapped) - 2.0 * d(l2, eta) * e1(l2 - 1, jp(s1 + 1.0, a2 + 1.0)))
                    * b1(l3, zeta)
                    - 2.0 * d(l3, zeta) * b2(l2, swapped) * e2(l3 - 1, jp(s2 + 2.0, a3 + 1.0));
                push([0, -1, 0], num / den);
            }
        }
    }
    Ok(merge_terms(terms.into_iter().filter(|t| l.shifted(t.offset).is_some()).collect()))
}
