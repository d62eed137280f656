//! Hierarchical modal shape functions on the reference tetrahedron:
//! interior, face, edge and vertex modes as short combinations of
//! `J_l^{-1,-1,-1,-1}`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::koornwinder::{derivative_expansion, Derivative, DubinerExpansion, Expansion, MultiIndex, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeClass {
    Interior,
    /// Face opposite vertex `j`.
    Face(u8),
    /// Edge between vertices `j < k`.
    Edge(u8, u8),
    Vertex(u8),
}

/// A shape function, labelled by the multi-index it carries in the modal basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub class: ModeClass,
    pub index: MultiIndex,
}

/// Edge listing order used for the global numbering.
pub const EDGES: [(u8, u8); 6] = [(0, 1), (0, 2), (0, 3), (1, 3), (1, 2), (2, 3)];

fn mi(l1: usize, l2: usize, l3: usize) -> MultiIndex {
    MultiIndex::new(l1, l2, l3)
}

/// Interior indices of degree at most `m`, `l1` outermost and `l3` innermost.
pub fn interior_indices(m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for l1 in 2..=m.saturating_sub(2) {
        for l2 in 1..=(m - l1).saturating_sub(1) {
            for l3 in 1..=m - l1 - l2 {
                out.push(mi(l1, l2, l3));
            }
        }
    }
    out
}

/// All modes of degree at most `m`: interior block first, then faces
/// `0..3`, edges in `EDGES` order and vertices `0..3`.
pub fn enumerate_modes(m: usize) -> Vec<ModeId> {
    let mut out: Vec<ModeId> =
        interior_indices(m).into_iter().map(|index| ModeId { class: ModeClass::Interior, index }).collect();
    let face = |j: u8, index: MultiIndex| ModeId { class: ModeClass::Face(j), index };
    // pairs (p, q) with p >= 2, q >= 1, p + q <= m
    let pairs: Vec<(usize, usize)> = (2..=m).flat_map(|p| (1..=m - p).map(move |q| (p, q))).collect();
    out.extend(pairs.iter().map(|&(l2, l3)| face(0, mi(1, l2 - 1, l3))));
    out.extend(pairs.iter().map(|&(l2, l3)| face(1, mi(0, l2, l3))));
    out.extend(pairs.iter().map(|&(l1, l3)| face(2, mi(l1, 0, l3))));
    out.extend(pairs.iter().map(|&(l1, l2)| face(3, mi(l1, l2, 0))));
    for &(j, k) in &EDGES {
        for l in 2..=m {
            let index = match (j, k) {
                (0, 1) => mi(l, 0, 0),
                (0, 2) => mi(0, l, 0),
                (0, 3) => mi(0, 0, l),
                (1, 3) => mi(1, 0, l - 1),
                (1, 2) => mi(1, l - 1, 0),
                _ => mi(0, 1, l - 1),
            };
            out.push(ModeId { class: ModeClass::Edge(j, k), index });
        }
    }
    let vertex = [mi(0, 0, 0), mi(1, 0, 0), mi(0, 1, 0), mi(0, 0, 1)];
    out.extend((0..4u8).map(|j| ModeId { class: ModeClass::Vertex(j), index: vertex[j as usize] }));
    out
}

/// Expansion of the shape function in the `(-1, -1, -1, -1)` family.
pub fn shape_expansion(mode: ModeId) -> Expansion {
    let MultiIndex { l2, l3, .. } = mode.index;
    let terms: Vec<(MultiIndex, f64)> = match mode.class {
        ModeClass::Interior => vec![(mode.index, 1.0)],
        ModeClass::Face(0) => {
            let p = l2 + 1;
            vec![(mi(0, p, l3), 1.0), (mi(1, p - 1, l3), -ratio(p))]
        }
        ModeClass::Face(1) => vec![(mi(0, l2, l3), 1.0), (mi(1, l2 - 1, l3), ratio(l2))],
        ModeClass::Face(_) => vec![(mode.index, 1.0)],
        ModeClass::Edge(0, 1) => vec![(mode.index, 1.0)],
        ModeClass::Edge(0, 2) => vec![(mi(0, l2, 0), 1.0), (mi(1, l2 - 1, 0), ratio(l2))],
        ModeClass::Edge(0, 3) => {
            vec![(mi(0, 0, l3), 0.5), (mi(0, 1, l3 - 1), ratio(l3) / 2.0), (mi(1, 0, l3 - 1), ratio(l3))]
        }
        ModeClass::Edge(1, 3) => {
            let p = l3 + 1;
            vec![(mi(0, 0, p), 0.5), (mi(0, 1, p - 1), ratio(p) / 2.0), (mi(1, 0, p - 1), -ratio(p))]
        }
        ModeClass::Edge(1, 2) => {
            let p = l2 + 1;
            vec![(mi(0, p, 0), 1.0), (mi(1, p - 1, 0), -ratio(p))]
        }
        ModeClass::Edge(..) => {
            let p = l3 + 1;
            vec![(mi(0, 0, p), 1.0), (mi(0, 1, p - 1), -ratio(p))]
        }
        ModeClass::Vertex(j) => {
            let (c, d1, d2, d3) = match j {
                0 => (0.125, -0.5, -0.25, -0.125),
                1 => (0.125, 0.5, -0.25, -0.125),
                2 => (0.25, 0.0, 0.5, -0.25),
                _ => (0.5, 0.0, 0.0, 0.5),
            };
            vec![(mi(0, 0, 0), c), (mi(1, 0, 0), d1), (mi(0, 1, 0), d2), (mi(0, 0, 1), d3)]
        }
    };
    Expansion::new(ParamVector::MINUS_ONE, terms)
}

/// `(p - 1) / p`.
fn ratio(p: usize) -> f64 {
    (p as f64 - 1.0) / p as f64
}

pub fn dubiner_expansion(mode: ModeId) -> DubinerExpansion {
    shape_expansion(mode).into_dubiner()
}

/// Dubiner expansion of a directional derivative of any `-1`-family expansion.
pub fn gradient_of(e: &Expansion, which: Derivative) -> Result<DubinerExpansion> {
    debug_assert!(e.params == ParamVector::MINUS_ONE);
    let mut terms = Vec::new();
    for &(l, c) in &e.terms {
        for t in derivative_expansion(l, e.params, which)? {
            if let Some(k) = t.target(l) {
                terms.push((k, c * t.coeff));
            }
        }
    }
    Ok(Expansion::new(which.target_family(e.params), terms).into_dubiner())
}

/// Dubiner expansion of a directional derivative of a shape function.
pub fn gradient_dubiner(mode: ModeId, which: Derivative) -> Result<DubinerExpansion> {
    gradient_of(&shape_expansion(mode), which)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koornwinder::RefPoint;
    use crate::quadrature::tet_rule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts(m: usize) -> [usize; 4] {
        let mut c = [0; 4];
        for mode in enumerate_modes(m) {
            c[match mode.class {
                ModeClass::Interior => 0,
                ModeClass::Face(_) => 1,
                ModeClass::Edge(..) => 2,
                ModeClass::Vertex(_) => 3,
            }] += 1;
        }
        c
    }

    fn random_interior(rng: &mut ChaCha8Rng) -> RefPoint {
        loop {
            let p = RefPoint::new(rng.gen_range(0.01..0.95), rng.gen_range(0.01..0.95), rng.gen_range(0.01..0.95));
            if p.x1 + p.x2 + p.x3 < 0.97 {
                return p;
            }
        }
    }

    /// Random point on face `j` (opposite vertex `j`).
    fn on_face(rng: &mut ChaCha8Rng, j: usize) -> RefPoint {
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            (u, v) = (1.0 - u, 1.0 - v);
        }
        match j {
            0 => RefPoint::new(u, v, 1.0 - u - v),
            1 => RefPoint::new(0.0, u, v),
            2 => RefPoint::new(u, 0.0, v),
            _ => RefPoint::new(u, v, 0.0),
        }
    }

    fn vertex(j: usize) -> RefPoint {
        [RefPoint::new(0.0, 0.0, 0.0), RefPoint::new(1.0, 0.0, 0.0), RefPoint::new(0.0, 1.0, 0.0), RefPoint::new(0.0, 0.0, 1.0)][j]
    }

    /// Vertices belonging to a mode's support entity.
    fn entity_vertices(class: ModeClass) -> Vec<usize> {
        match class {
            ModeClass::Interior => vec![],
            ModeClass::Face(j) => (0..4).filter(|&k| k != j as usize).collect(),
            ModeClass::Edge(j, k) => vec![j as usize, k as usize],
            ModeClass::Vertex(j) => vec![j as usize],
        }
    }

    #[test]
    fn mode_counts() {
        assert_eq!(counts(2), [0, 0, 6, 4]);
        assert_eq!(counts(3), [0, 4, 12, 4]);
        assert_eq!(counts(6)[0], 10);
        for m in 1..=10 {
            assert_eq!(enumerate_modes(m).len(), (m + 1) * (m + 2) * (m + 3) / 6);
        }
    }

    #[test]
    fn expansion_examples() {
        let p3 = shape_expansion(ModeId { class: ModeClass::Vertex(3), index: mi(0, 0, 1) });
        assert_eq!(p3.terms, vec![(mi(0, 0, 0), 0.5), (mi(0, 0, 1), 0.5)]);
        let i = shape_expansion(ModeId { class: ModeClass::Interior, index: mi(2, 1, 1) });
        assert_eq!(i.terms, vec![(mi(2, 1, 1), 1.0)]);
    }

    #[test]
    fn dubiner_form_agrees_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for mode in enumerate_modes(6) {
            let s = shape_expansion(mode);
            let d = dubiner_expansion(mode);
            for _ in 0..50 {
                let p = random_interior(&mut rng);
                let (a, b) = (s.eval(p), d.eval(p));
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{mode:?}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let h = 1e-6;
        for mode in enumerate_modes(6) {
            let s = shape_expansion(mode);
            for which in Derivative::ALL {
                let g = gradient_dubiner(mode, which).unwrap();
                let w = which.gradient_weights();
                for _ in 0..30 {
                    let p = random_interior(&mut rng);
                    let at = |t: f64| s.eval(RefPoint::new(p.x1 + t * w[0], p.x2 + t * w[1], p.x3 + t * w[2]));
                    let fd = (at(h) - at(-h)) / (2.0 * h);
                    assert!((g.eval(p) - fd).abs() < 1e-6, "{mode:?} {which:?}");
                }
            }
        }
    }

    #[test]
    fn vertex_mode_gradient_is_constant() {
        let g = gradient_dubiner(ModeId { class: ModeClass::Vertex(3), index: mi(0, 0, 1) }, Derivative::D3).unwrap();
        assert_eq!(g.terms.len(), 1);
        assert_eq!(g.terms[0].0, mi(0, 0, 0));
        assert!((g.terms[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn traces_vanish_off_their_entity() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for mode in enumerate_modes(8) {
            let e = shape_expansion(mode);
            let own = entity_vertices(mode.class);
            for face in 0..4 {
                // a face contains the entity iff it avoids none of its vertices
                let contains = !own.is_empty() && !own.contains(&face);
                if contains {
                    continue;
                }
                for _ in 0..50 {
                    let v = e.eval(on_face(&mut rng, face));
                    assert!(v.abs() < 1e-12, "{mode:?} on face {face}: {v:e}");
                }
            }
        }
    }

    #[test]
    fn vertex_modes_are_nodal() {
        for j in 0..4 {
            let e = shape_expansion(ModeId { class: ModeClass::Vertex(j as u8), index: mi(0, 0, 0) });
            for k in 0..4 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((e.eval(vertex(k)) - want).abs() < 1e-12, "vertex {j} at {k}");
            }
        }
    }

    #[test]
    fn modes_are_linearly_independent() {
        for m in 1..=6 {
            let modes = enumerate_modes(m);
            let rule = tet_rule(m + 2).unwrap();
            let exps: Vec<_> = modes.iter().map(|&md| dubiner_expansion(md)).collect();
            let n = exps.len();
            let gram = faer::Mat::<f64>::from_fn(n, n, |i, j| exps[i].l2_inner(&exps[j]));
            let ev = gram.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            assert!(ev[0] > 1e-12, "m={m}: {}", ev[0]);
            // exact inner products agree with quadrature
            let q = rule.integrate(|p| exps[n - 1].eval(p) * exps[0].eval(p));
            assert!((q - gram[(n - 1, 0)]).abs() < 1e-13);
        }
    }
}
