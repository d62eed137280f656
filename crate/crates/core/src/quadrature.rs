//! Gauss-Jacobi rules and collapsed tensor-product rules on the reference
//! tetrahedron and its faces.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::jacobi::{jacobi_with_derivative, JacobiParams};
use crate::koornwinder::{expand, CollapsedPoint, RefPoint};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights of the `n`-point Gauss-Jacobi rule for the weight
/// `(1-x)^alpha (1+x)^beta` on `[-1, 1]`, nodes ascending.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::InvalidArgument(format!("Gauss-Jacobi rule needs n >= 1 and parameters > -1 (n = {n})")));
    }
    let p = JacobiParams::new(alpha, beta)?;
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let mut r = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        if k > 0 {
            r = (r + nodes[k - 1]) / 2.0;
        }
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (f, df) = jacobi_with_derivative(n, p, r);
            let s: f64 = nodes.iter().map(|&x| 1.0 / (r - x)).sum();
            let delta = -f / (df - s * f);
            r += delta;
            if delta.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::QuadratureNotConverged { n, alpha });
        }
        nodes.push(r);
    }
    let nf = n as f64;
    let log_const = (alpha + beta + 1.0) * std::f64::consts::LN_2 + libm::lgamma(nf + alpha + 1.0) + libm::lgamma(nf + beta + 1.0)
        - libm::lgamma(nf + 1.0)
        - libm::lgamma(nf + alpha + beta + 1.0);
    let c = log_const.exp();
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, d) = jacobi_with_derivative(n, p, x);
            c / ((1.0 - x * x) * d * d)
        })
        .collect();
    Ok((nodes, weights))
}

/// Tensor-product rule on the reference tetrahedron with `order` points per
/// collapsed direction.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<RefPoint>,
    pub weights: Vec<f64>,
    pub order: usize,
}

/// Exact for polynomials of total degree `2 * order - 1`; weights sum to `1/6`.
pub fn tet_rule(order: usize) -> Result<QuadratureRule> {
    let (xs, wx) = gauss_jacobi(order, 0.0, 0.0)?;
    let (ys, wy) = gauss_jacobi(order, 1.0, 0.0)?;
    let (zs, wz) = gauss_jacobi(order, 2.0, 0.0)?;
    let mut nodes = Vec::with_capacity(order.pow(3));
    let mut weights = Vec::with_capacity(order.pow(3));
    for (&xi, &a) in xs.iter().zip(&wx) {
        for (&eta, &b) in ys.iter().zip(&wy) {
            for (&zeta, &c) in zs.iter().zip(&wz) {
                nodes.push(expand(CollapsedPoint { xi, eta, zeta }));
                weights.push(a * b * c / 64.0);
            }
        }
    }
    Ok(QuadratureRule { nodes, weights, order })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral over the reference tetrahedron.
    pub fn integrate(&self, f: impl Fn(RefPoint) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    /// Integral over `t` of a function of physical coordinates.
    pub fn integrate_physical(&self, t: &Tetrahedron, f: impl Fn(Vector3<f64>) -> f64) -> f64 {
        6.0 * t.volume() * self.integrate(|p| f(t.affine_map(p)))
    }
}

/// Rule on the triangle `u, v >= 0, u + v <= 1`: `(u, v, weight)`, weights sum to `1/2`.
pub fn triangle_rule(order: usize) -> Result<Vec<(f64, f64, f64)>> {
    let (xs, wx) = gauss_jacobi(order, 0.0, 0.0)?;
    let (ys, wy) = gauss_jacobi(order, 1.0, 0.0)?;
    let mut out = Vec::with_capacity(order * order);
    for (&xi, &a) in xs.iter().zip(&wx) {
        for (&eta, &b) in ys.iter().zip(&wy) {
            let v = (1.0 + eta) / 2.0;
            let u = (1.0 + xi) / 2.0 * (1.0 - v);
            out.push((u, v, a * b / 8.0));
        }
    }
    Ok(out)
}

/// A boundary quadrature node: face index, reference point, physical weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode {
    pub face: usize,
    pub point: RefPoint,
    pub weight: f64,
}

fn reference_vertex(j: usize) -> [f64; 3] {
    let mut v = [0.0; 3];
    if j > 0 {
        v[j - 1] = 1.0;
    }
    v
}

/// Rule for `L^2(boundary of t)`: each face carries a triangle rule scaled
/// by twice its physical area.
pub fn boundary_rule(t: &Tetrahedron, order: usize) -> Result<Vec<BoundaryNode>> {
    let tri = triangle_rule(order)?;
    let mut out = Vec::with_capacity(4 * tri.len());
    for face in 0..4 {
        let vs: Vec<[f64; 3]> = (0..4).filter(|&k| k != face).map(reference_vertex).collect();
        let scale = 2.0 * t.face_area(face);
        for &(u, v, w) in &tri {
            let c = |i: usize| vs[0][i] + u * (vs[1][i] - vs[0][i]) + v * (vs[2][i] - vs[0][i]);
            out.push(BoundaryNode { face, point: RefPoint::new(c(0), c(1), c(2)), weight: w * scale });
        }
    }
    Ok(out)
}
