//! Source problems with homogeneous or lifted Dirichlet data, the
//! generalized eigenproblem `S u = mu M u`, and Crank-Nicolson time stepping.

use faer::{Mat, Side};
use nalgebra::Vector3;

use crate::assembly::{
    assemble_boundary, assemble_load_modes, assemble_mass_const, assemble_mass_variable, assemble_stiffness,
    assemble_stiffness_modes, boundary_modes, interior_modes, load_from_values, mode_values_at, BoundaryLift, Coefficient,
    Field,
};
use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::koornwinder::{collapse, expand, graded_size, CollapsedPoint, ParamVector, RefPoint};
use crate::modal::{dubiner_expansion, ModeId};
use crate::quadrature::tet_rule;
use crate::recurrence::{Clenshaw, ExpansionCoeffs};
use crate::sparse::SparseSymMatrix;

/// Time-dependent source `f(x, t)`.
pub type TimeField<'a> = &'a (dyn Fn(Vector3<f64>, f64) -> f64 + Sync);

/// Finite-degree field stored as Dubiner coefficients, evaluated by Clenshaw.
#[derive(Debug)]
pub struct ModalField {
    coeffs: ExpansionCoeffs,
    clenshaw: Clenshaw,
}

impl ModalField {
    /// Combines modal coefficients into one Dubiner expansion of degree `m`.
    pub fn new(m: usize, parts: &[(&[ModeId], &[f64])]) -> Result<Self> {
        let mut graded = vec![0.0; graded_size(m)];
        for (modes, coeffs) in parts {
            for (&md, &c) in modes.iter().zip(coeffs.iter()) {
                for (l, d) in dubiner_expansion(md).terms {
                    graded[l.graded_position()] += c * d;
                }
            }
        }
        let coeffs = ExpansionCoeffs::from_graded(m, &graded)?;
        let clenshaw = Clenshaw::new(ParamVector::ZERO, m);
        clenshaw.prepare()?;
        Ok(Self { coeffs, clenshaw })
    }

    pub fn eval(&self, p: RefPoint) -> Result<f64> {
        self.clenshaw.eval(&self.coeffs, p)
    }
}

/// Solution of a source problem.
#[derive(Debug)]
pub struct SolveResult {
    pub degree: usize,
    /// Coefficients of the interior modes in system order.
    pub interior: Vec<f64>,
    /// Boundary part for non-homogeneous data.
    pub boundary: Option<BoundaryLift>,
    /// `|A u - b| / |b|` of the interior system.
    pub relative_residual: f64,
}

impl SolveResult {
    pub fn field(&self) -> Result<ModalField> {
        let modes = interior_modes(self.degree);
        match &self.boundary {
            Some(b) => ModalField::new(self.degree, &[(&modes, &self.interior), (&b.modes, &b.coeffs)]),
            None => ModalField::new(self.degree, &[(&modes, &self.interior)]),
        }
    }
}

/// Cholesky factor of a dense SPD matrix, reused across right-hand sides.
pub struct SpdSolver {
    llt: faer::linalg::solvers::Llt<f64>,
    dim: usize,
}

impl SpdSolver {
    pub fn new(a: &Mat<f64>, what: &str) -> Result<Self> {
        let dim = a.nrows();
        let llt = a.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { what: what.into(), dim })?;
        Ok(Self { llt, dim })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = Mat::from_fn(self.dim, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.dim).map(|i| x[(i, 0)]).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(S + M_gamma)` over the interior modes.
pub fn system_matrix(t: &Tetrahedron, m: usize, gamma: Coefficient) -> Result<SparseSymMatrix> {
    let s = assemble_stiffness(t, m)?;
    Ok(match gamma {
        Coefficient::Constant(0.0) => s,
        Coefficient::Constant(c) => s.add_scaled(&assemble_mass_const(t, m, c), 1.0),
        Coefficient::Field(g) => s.add_scaled(&assemble_mass_variable(t, m, g)?.matrix, 1.0),
    })
}

/// Solves `-div grad u + gamma u = f` in `t`, `u = g` on the boundary, in the
/// degree-`m` space. Without `g` the data is homogeneous.
pub fn solve_source(t: &Tetrahedron, m: usize, gamma: Coefficient, f: Field, g: Option<Field>) -> Result<SolveResult> {
    let modes = interior_modes(m);
    let a = system_matrix(t, m, gamma)?;
    let order = m + 4;
    let mut rhs = assemble_load_modes(t, &modes, f, order)?;
    let boundary = match g {
        None => None,
        Some(g) => {
            let lift = assemble_boundary(t, m, g)?;
            // stiffness coupling exactly, reaction coupling as a load of gamma u_b
            let mut all = modes.clone();
            all.extend(boundary_modes(m));
            let s_all = assemble_stiffness_modes(t, &all)?;
            let n = modes.len();
            for (i, j, v) in s_all.upper_entries() {
                if i < n && j >= n {
                    rhs[i] -= v * lift.coeffs[j - n];
                }
            }
            let gamma_is_zero = matches!(gamma, Coefficient::Constant(c) if c == 0.0);
            if !gamma_is_zero {
                let ub = ModalField::new(m, &[(&lift.modes, &lift.coeffs)])?;
                let rule = tet_rule(order)?;
                let react = rule
                    .nodes
                    .iter()
                    .map(|&p| {
                        let gx = match gamma {
                            Coefficient::Constant(c) => c,
                            Coefficient::Field(h) => h(t.affine_map(p)),
                        };
                        Ok(gx * ub.eval(p)?)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let coupling = load_from_values(t, &rule.weights, &mode_values_at(&modes, &rule.nodes), &react);
                for (r, c) in rhs.iter_mut().zip(coupling) {
                    *r -= c;
                }
            }
            Some(lift)
        }
    };
    let dense = a.to_dense();
    let solver = SpdSolver::new(&dense, "Galerkin system")?;
    let interior = solver.solve(&rhs);
    let res: Vec<f64> = a.mul_vec(&interior).iter().zip(&rhs).map(|(x, b)| x - b).collect();
    let relative_residual = norm(&res) / norm(&rhs).max(f64::MIN_POSITIVE);
    Ok(SolveResult { degree: m, interior, boundary, relative_residual })
}

/// Eigenpairs of `S u = mu M u` sorted ascending.
#[derive(Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Columns are `M`-orthonormal eigenvectors in interior system order.
    pub vectors: Mat<f64>,
}

/// Dirichlet Laplacian eigenpairs in the degree-`m` interior space. Returns
/// the `count` smallest, or all of them.
pub fn solve_eigen(t: &Tetrahedron, m: usize, count: Option<usize>) -> Result<EigenResult> {
    if m < 4 {
        return Err(Error::InvalidArgument(format!("eigenproblem needs degree >= 4, got {m}")));
    }
    let s = assemble_stiffness(t, m)?.to_dense();
    let mass = assemble_mass_const(t, m, 1.0).to_dense();
    let n = s.nrows();
    let llt = mass.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { what: "mass matrix".into(), dim: n })?;
    let l = llt.L();
    // C = L^-1 S L^-T
    let mut x = s.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let k = count.unwrap_or(n).min(n);
    let values: Vec<f64> = (0..k).map(|i| evd.S().column_vector()[i]).collect();
    let mut vectors = evd.U().subcols(0, k).to_owned();
    l.transpose().solve_upper_triangular_in_place(vectors.as_mut());
    Ok(EigenResult { values, vectors })
}

/// Uniform time grid `t_n = n dt`, `n = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Grid reaching `t_final`; `t_final / dt` must be an integer up to rounding.
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!("time grid needs dt > 0 and t_final >= 0 (dt = {dt})")));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::InvalidArgument(format!("t_final = {t_final} is not a multiple of dt = {dt}")));
        }
        Ok(Self { dt, steps: steps as usize })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Interior coefficients at every time level.
#[derive(Debug)]
pub struct Trajectory {
    pub degree: usize,
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn field(&self, n: usize) -> Result<ModalField> {
        let modes = interior_modes(self.degree);
        ModalField::new(self.degree, &[(&modes, &self.states[n])])
    }
}

/// Crank-Nicolson for `u_t - div grad u = f` with homogeneous Dirichlet data.
/// `u^0` is the `L^2` projection of `u0`; the step matrix is factorized once.
pub fn crank_nicolson(t: &Tetrahedron, m: usize, f: TimeField, u0: Field, grid: TimeGrid) -> Result<Trajectory> {
    let modes = interior_modes(m);
    let s = assemble_stiffness(t, m)?;
    let mass = assemble_mass_const(t, m, 1.0);
    let order = m + 4;
    let rule = tet_rule(order)?;
    let phys: Vec<Vector3<f64>> = rule.nodes.iter().map(|&p| t.affine_map(p)).collect();
    // basis values at the nodes, reused by every load evaluation
    let values = mode_values_at(&modes, &rule.nodes);
    let load = |g: &dyn Fn(Vector3<f64>) -> f64| -> Vec<f64> {
        let gv: Vec<f64> = phys.iter().map(|&x| g(x)).collect();
        load_from_values(t, &rule.weights, &values, &gv)
    };

    let mass_solver = SpdSolver::new(&mass.to_dense(), "mass matrix")?;
    let mut u = mass_solver.solve(&load(&|x| u0(x)));
    let lhs = mass.clone().scaled(1.0 / grid.dt).add_scaled(&s, 0.5);
    let rhs_op = mass.scaled(1.0 / grid.dt).add_scaled(&s, -0.5);
    let step_solver = SpdSolver::new(&lhs.to_dense(), "Crank-Nicolson matrix")?;
    let mut states = Vec::with_capacity(grid.steps + 1);
    states.push(u.clone());
    let mut f_prev = load(&|x| f(x, 0.0));
    for k in 1..=grid.steps {
        let tk = grid.time(k);
        let f_next = load(&|x| f(x, tk));
        let mut b = rhs_op.mul_vec(&u);
        for ((bi, a), c) in b.iter_mut().zip(&f_prev).zip(&f_next) {
            *bi += 0.5 * (a + c);
        }
        u = step_solver.solve(&b);
        states.push(u.clone());
        f_prev = f_next;
    }
    Ok(Trajectory { degree: m, grid, states })
}

/// Midpoint tensor grid of `n^3` collapsed coordinates mapped into the
/// reference tetrahedron; no point lies on a singular line.
pub fn sample_grid(n: usize) -> Vec<RefPoint> {
    let z = |i: usize| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(expand(CollapsedPoint { xi: z(i), eta: z(j), zeta: z(k) }));
            }
        }
    }
    out
}

/// Largest `|u_h - u|` over `sample_grid(20)`.
pub fn max_error(t: &Tetrahedron, u_h: &ModalField, exact: Field) -> Result<f64> {
    let mut worst = 0.0_f64;
    for p in sample_grid(20) {
        debug_assert!(collapse(p).is_ok());
        worst = worst.max((u_h.eval(p)? - exact(t.affine_map(p))).abs());
    }
    Ok(worst)
}

/// `||u_h - u||_{L^2(t)}` by a tet rule with `order` points per direction.
pub fn l2_error(t: &Tetrahedron, u_h: &ModalField, exact: Field, order: usize) -> Result<f64> {
    let rule = tet_rule(order)?;
    let mut acc = 0.0;
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let d = u_h.eval(*p)? - exact(t.affine_map(*p));
        acc += w * d * d;
    }
    Ok((6.0 * t.volume() * acc).sqrt())
}
