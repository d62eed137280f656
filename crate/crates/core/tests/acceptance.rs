//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero when a check fails that is not a known, documented shortfall.

use std::process::ExitCode;
use std::time::Instant;

use faer::{Mat, Side};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tetspec::analytic::{exact_tf_spectrum, gap_stats, loglog_slope};
use tetspec::assembly::{
    assemble_mass_const, assemble_mass_const_modes, assemble_mass_variable, assemble_stiffness,
    assemble_stiffness_modes, count_outside_band, interior_modes, mass_by_quadrature, stiffness_by_quadrature,
    MASS_BLOCK_OFFSETS, STIFFNESS_BLOCK_OFFSETS, SUB_BAND,
};
use tetspec::jacobi::{
    demotion_e, derivative_coeff, jacobi_eval_all, jacobi_with_derivative, promotion_b, three_term_coeffs,
};
use tetspec::koornwinder::{
    derivative_expansion, graded_indices, graded_size, koornwinder_eval, koornwinder_eval_all, promote_param,
    three_term_scalar,
};
use tetspec::recurrence::{build_generalized_inverse, build_recurrence, left_inverse_error, Clenshaw, ExpansionCoeffs};
use tetspec::solvers::{crank_nicolson, l2_error, max_error, solve_eigen, solve_source, TimeGrid};
use tetspec::{
    Coefficient, Derivative, Example, ExpansionTerm, JacobiParams, MultiIndex, OpCounter, ParamVector, Preset, RefPoint,
    SparseSymMatrix, Tetrahedron,
};

/// Sub-checks known to miss their target; see the README.
const DOCUMENTED: &[(usize, &str)] =
    &[(2, "nonzeros per column"), (4, "recursion cost exponent"), (8, "largest eigenvalue exponent")];

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check { name, ok, detail }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn random_interior(rng: &mut ChaCha8Rng) -> RefPoint {
    loop {
        let p = RefPoint::new(rng.gen_range(0.02..0.9), rng.gen_range(0.02..0.9), rng.gen_range(0.02..0.9));
        if p.x1 + p.x2 + p.x3 < 0.97 {
            return p;
        }
    }
}

fn sum_terms(l: MultiIndex, to: ParamVector, terms: &[ExpansionTerm], p: RefPoint) -> f64 {
    terms.iter().map(|t| t.target(l).map_or(0.0, |k| t.coeff * koornwinder_eval(k, to, p))).sum()
}

fn relative_gap(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn identities() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<RefPoint> = (0..50).map(|_| random_interior(&mut rng)).collect();

    // One-dimensional rewrites for the parameter pairs the tetrahedral families use.
    let mut worst_1d = 0.0_f64;
    for (a, b) in [(-1.0, -1.0), (0.0, 0.0), (1.0, -1.0), (2.0, 0.0), (3.0, 1.0), (-1.0, 2.0)] {
        let p = JacobiParams::new(a, b).unwrap();
        let up = JacobiParams::new(a + 1.0, b).unwrap();
        let both = JacobiParams::new(a + 1.0, b + 1.0).unwrap();
        for _ in 0..50 {
            let z: f64 = rng.gen_range(-0.99..0.99);
            let j = jacobi_eval_all(8, p, z);
            let ju = jacobi_eval_all(8, up, z);
            let jb = jacobi_eval_all(8, both, z);
            for k in 0..=6usize {
                let ki = k as i64;
                let prev = |v: &[f64]| if k == 0 { 0.0 } else { v[k - 1] };
                let c = three_term_coeffs(ki, p);
                worst_1d = worst_1d.max(relative_gap(c.a1 * j[k + 1] + c.a2 * j[k] + c.a3 * prev(&j), z * j[k]));
                let (b1, b2) = promotion_b(ki, p);
                worst_1d = worst_1d.max(relative_gap(b1 * ju[k] + b2 * prev(&ju), j[k]));
                let (e1, e2) = demotion_e(ki, p);
                worst_1d = worst_1d.max(relative_gap(e1 * j[k] + e2 * j[k + 1], (1.0 - z) / 2.0 * ju[k]));
                let (_, dj) = jacobi_with_derivative(k, p, z);
                worst_1d = worst_1d.max(relative_gap(derivative_coeff(ki, p) * prev(&jb), dj));
            }
        }
    }

    let mut worst_promote = 0.0_f64;
    let mut worst_three = 0.0_f64;
    let mut worst_deriv = 0.0_f64;
    let mut worst_block = 0.0_f64;
    let h = 1e-6;
    for a in [ParamVector::MINUS_ONE, ParamVector::ZERO] {
        for &l in &graded_indices(6) {
            for &p in &points {
                let value = koornwinder_eval(l, a, p);
                for slot in 0..4 {
                    let got = sum_terms(l, a.raised(slot), &promote_param(l, a, slot), p);
                    worst_promote = worst_promote.max(relative_gap(got, value));
                }
                for dir in 1..=3 {
                    let got = sum_terms(l, a, &three_term_scalar(l, a, dir), p);
                    worst_three = worst_three.max(relative_gap(got, p.coord(dir) * value));
                }
                for which in Derivative::ALL {
                    let Ok(terms) = derivative_expansion(l, a, which) else { continue };
                    let w = which.gradient_weights();
                    let shift = |s: f64| RefPoint::new(p.x1 + s * w[0], p.x2 + s * w[1], p.x3 + s * w[2]);
                    let fd = (koornwinder_eval(l, a, shift(h)) - koornwinder_eval(l, a, shift(-h))) / (2.0 * h);
                    let got = sum_terms(l, which.target_family(a), &terms, p);
                    worst_deriv = worst_deriv.max((got - fd).abs() / fd.abs().max(1.0));
                }
            }
        }
        // block form of the recurrence
        for m in 0..=5 {
            let rec = build_recurrence(m, a);
            for &p in points.iter().take(10) {
                let all = koornwinder_eval_all(m + 1, a, p);
                let block = |k: usize| -> Vec<f64> {
                    let start = if k == 0 { 0 } else { graded_size(k - 1) };
                    all[start..graded_size(k)].to_vec()
                };
                let prev = if m == 0 { Vec::new() } else { block(m - 1) };
                let res = rec.residual(p, &block(m + 1), &block(m), &prev);
                let scale = all.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
                worst_block = worst_block.max(res.iter().fold(0.0_f64, |s, v| s.max(v.abs())) / scale);
            }
        }
    }
    vec![
        check("one-dimensional rewrites", worst_1d <= 1e-11, format!("{worst_1d:.1e}")),
        check("parameter promotion", worst_promote <= 1e-11, format!("{worst_promote:.1e}")),
        check("coordinate multiplication", worst_three <= 1e-11, format!("{worst_three:.1e}")),
        check("block recurrence", worst_block <= 1e-11, format!("{worst_block:.1e}")),
        check("derivatives vs central differences", worst_deriv <= 1e-6, format!("{worst_deriv:.1e}")),
    ]
}

fn inverses() -> Vec<Check> {
    let mut worst = 0.0_f64;
    let mut max_count = 0;
    let mut offenders = 0;
    for a in [ParamVector::MINUS_ONE, ParamVector::ZERO] {
        for m in 0..=20 {
            let rec = build_recurrence(m, a);
            let inv = build_generalized_inverse(&rec).unwrap();
            worst = worst.max(left_inverse_error(&inv, &rec));
            let counts = inv.d.column_counts();
            max_count = max_count.max(*counts.iter().max().unwrap_or(&0));
            offenders += counts.iter().filter(|&&c| c > 2).count();
        }
    }
    vec![
        check("left inverse", worst <= 1e-12, format!("max |DA - I| {worst:.1e}")),
        check(
            "nonzeros per column",
            max_count <= 2,
            format!("max {max_count}, {offenders} columns above 2"),
        ),
    ]
}

fn clenshaw() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for a in [ParamVector::ZERO, ParamVector::MINUS_ONE] {
        for m in 1..=15 {
            let coeffs: Vec<f64> = (0..graded_size(m)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ex = ExpansionCoeffs::from_graded(m, &coeffs).unwrap();
            let cl = Clenshaw::new(a, m);
            cl.prepare().unwrap();
            for _ in 0..30 {
                let p = random_interior(&mut rng);
                let terms: Vec<f64> = koornwinder_eval_all(m, a, p).iter().zip(&coeffs).map(|(v, c)| v * c).collect();
                let naive: f64 = terms.iter().sum();
                let scale: f64 = terms.iter().map(|v| v.abs()).sum();
                worst = worst.max((cl.eval(&ex, p).unwrap() - naive).abs() / scale);
            }
        }
    }
    let degrees = [8usize, 16, 32];
    let mut ops = Vec::new();
    for &m in &degrees {
        let ex = ExpansionCoeffs::from_graded(m, &vec![1.0; graded_size(m)]).unwrap();
        let cl = Clenshaw::new(ParamVector::ZERO, m);
        cl.prepare().unwrap();
        let mut count = OpCounter::default();
        cl.eval_counted(&ex, RefPoint::new(0.2, 0.3, 0.1), &mut count).unwrap();
        ops.push(count.0 as f64);
    }
    let ms: Vec<f64> = degrees.iter().map(|&m| m as f64).collect();
    let slope = loglog_slope(&ms, &ops);
    vec![
        check("agreement with direct summation", worst <= 1e-10, format!("{worst:.1e}")),
        check("operation count exponent", within(slope, 3.0, 0.2), format!("{slope:.3} from {ops:?}")),
    ]
}

fn rel_diff(a: &SparseSymMatrix, b: &Mat<f64>) -> f64 {
    let n = a.dim();
    let scale = (0..n).map(|i| b[(i, i)].abs()).fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a.get(i, j) - b[(i, j)]).abs() / scale);
        }
    }
    worst
}

fn skewed() -> Tetrahedron {
    Tetrahedron::new([[0.1, -0.2, 0.0], [1.3, 0.1, 0.2], [0.2, 0.9, -0.1], [0.3, 0.2, 1.1]]).unwrap()
}

fn assembly() -> Vec<Check> {
    let mut worst_exact = 0.0_f64;
    for t in [Preset::Reference.tetrahedron(), skewed()] {
        let modes = interior_modes(6);
        let s = assemble_stiffness_modes(&t, &modes).unwrap();
        worst_exact = worst_exact.max(rel_diff(&s, &stiffness_by_quadrature(&t, &modes, 8).unwrap()));
        let mass = assemble_mass_const_modes(&t, &modes, 1.0);
        let q = mass_by_quadrature(&t, &modes, Coefficient::Constant(1.0), 8).unwrap();
        worst_exact = worst_exact.max(rel_diff(&mass, &q));
    }
    let t = Preset::Reference.tetrahedron();
    let gamma = |x: Vector3<f64>| (x[0] + x[1] + x[2] + 1.0).exp();
    let var = assemble_mass_variable(&t, 8, &gamma).unwrap();
    let q = mass_by_quadrature(&t, &interior_modes(8), Coefficient::Field(&gamma), 16).unwrap();
    let var_err = rel_diff(&var.matrix, &q);
    let constant = assemble_mass_variable(&skewed(), 8, &|_| 3.0).unwrap();
    let const_err = rel_diff(&constant.matrix, &assemble_mass_const(&skewed(), 8, 3.0).to_dense());

    let degrees = [8usize, 12, 16, 20];
    let ops: Vec<f64> =
        degrees.iter().map(|&m| assemble_mass_variable(&t, m, &gamma).unwrap().recursion_ops as f64).collect();
    let ms: Vec<f64> = degrees.iter().map(|&m| m as f64).collect();
    let slope = loglog_slope(&ms, &ops);
    vec![
        check("exact vs quadrature stiffness and mass", worst_exact <= 1e-11, format!("{worst_exact:.1e}")),
        check("variable coefficient vs quadrature", var_err <= 1e-8, format!("{var_err:.1e}")),
        check("variable path with constant coefficient", const_err <= 1e-9, format!("{const_err:.1e}")),
        check("recursion cost exponent", within(slope, 6.0, 0.5), format!("{slope:.2} from {ops:?}")),
    ]
}

fn sparsity() -> Vec<Check> {
    let m = 22;
    let mut out = Vec::new();
    for (name, t) in [("reference", Preset::Reference.tetrahedron()), ("skewed", skewed())] {
        let s = assemble_stiffness(&t, m).unwrap();
        let mass = assemble_mass_const(&t, m, 1.0);
        let outside_s = count_outside_band(m, &s, &STIFFNESS_BLOCK_OFFSETS, SUB_BAND);
        let outside_m = count_outside_band(m, &mass, &MASS_BLOCK_OFFSETS, SUB_BAND);
        out.push(check(
            if name == "reference" { "band pattern, reference" } else { "band pattern, skewed" },
            outside_s == 0 && outside_m == 0,
            format!("{name}: stiffness {outside_s} / {} outside, mass {outside_m} / {} outside", s.nnz(), mass.nnz()),
        ));
    }
    out
}

/// Decay checks on an error sequence over even degrees; values below
/// `floor` sit at rounding level and are exempt from the shape tests.
fn decay_checks(degrees: &[usize], errors: &[f64], floor: f64) -> (bool, bool, Option<f64>) {
    let mut monotone = true;
    let mut ratios_ok = true;
    let mut worst_ratio: Option<f64> = None;
    for i in 1..degrees.len() {
        if degrees[i - 1] < 8 || errors[i - 1] <= floor {
            continue;
        }
        let ratio = errors[i] / errors[i - 1];
        monotone &= ratio < 1.0;
        if degrees[i - 1] >= 12 {
            worst_ratio = Some(worst_ratio.map_or(ratio, |w: f64| w.max(ratio)));
            ratios_ok &= ratio < 0.5;
        }
    }
    (monotone, ratios_ok, worst_ratio)
}

fn convergence() -> Vec<Check> {
    let t = Preset::Reference.tetrahedron();
    let degrees: Vec<usize> = (4..=22).step_by(2).collect();
    let mut reached = true;
    let mut shape = true;
    let mut super_alg = true;
    let mut details = Vec::new();
    for example in [Example::Example1, Example::Example2, Example::Example3] {
        let (mut maxes, mut l2s) = (Vec::new(), Vec::new());
        for &m in &degrees {
            let f = |x: Vector3<f64>| example.source(x, 0.0);
            let u = |x: Vector3<f64>| example.solution(x, 0.0);
            let g = |x: Vector3<f64>| example.gamma(x);
            let gamma = match example.constant_gamma() {
                Some(c) => Coefficient::Constant(c),
                None => Coefficient::Field(&g),
            };
            let bc: Option<tetspec::Field> = if example.homogeneous_on_reference() { None } else { Some(&u) };
            let field = solve_source(&t, m, gamma, &f, bc).unwrap().field().unwrap();
            maxes.push(max_error(&t, &field, &u).unwrap());
            l2s.push(l2_error(&t, &field, &u, m + 6).unwrap());
        }
        let (mono_a, ratio_a, wa) = decay_checks(&degrees, &maxes, 1e-11);
        let (mono_b, ratio_b, wb) = decay_checks(&degrees, &l2s, 1e-12);
        reached &= maxes.last().unwrap() <= &1e-8 && l2s.last().unwrap() <= &1e-8;
        shape &= mono_a && mono_b;
        super_alg &= ratio_a && ratio_b;
        let ratio = match (wa, wb) {
            (None, None) => "no ratio above the rounding floor from M=12".to_string(),
            (a, b) => format!("worst ratio from M=12 {:.1e}", a.unwrap_or(0.0).max(b.unwrap_or(0.0))),
        };
        let floor_at = degrees.iter().zip(&maxes).find(|(_, e)| **e <= 1e-11).map_or(0, |(m, _)| *m);
        details.push(format!(
            "{}: max {:.1e} l2 {:.1e} at M=22, max error at floor from M={floor_at}, {ratio}",
            example.name(),
            maxes.last().unwrap(),
            l2s.last().unwrap(),
        ));
    }
    let detail = details.join("; ");
    vec![
        check("errors reach 1e-8 by M=22", reached, detail),
        check("monotone decay after M=8", shape, String::new()),
        check("consecutive ratio below 0.5 from M=12", super_alg, String::new()),
    ]
}

fn heat() -> Vec<Check> {
    let t = Preset::Reference.tetrahedron();
    let example = Example::Example4;
    let f = |x: Vector3<f64>, s: f64| example.source(x, s);
    let u0 = |x: Vector3<f64>| example.solution(x, 0.0);
    let grid = TimeGrid::new(1.0 / 1024.0, 1.0).unwrap();
    let degrees: Vec<usize> = (6..=14).step_by(2).collect();
    let mut errors = [Vec::new(), Vec::new()];
    for &m in &degrees {
        let traj = crank_nicolson(&t, m, &f, &u0, grid).unwrap();
        for (k, n) in [grid.steps / 2, grid.steps].into_iter().enumerate() {
            let time = grid.time(n);
            let exact = |x: Vector3<f64>| example.solution(x, time);
            errors[k].push(l2_error(&t, &traj.field(n).unwrap(), &exact, m + 6).unwrap());
        }
    }
    let decays = errors.iter().all(|e| e.windows(2).all(|w| w[1] < 0.5 * w[0]));
    let floor = errors.iter().map(|e| *e.last().unwrap()).fold(0.0, f64::max);

    let dts: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
    let temporal: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let grid = TimeGrid::new(dt, 1.0).unwrap();
            let traj = crank_nicolson(&t, 14, &f, &u0, grid).unwrap();
            let exact = |x: Vector3<f64>| example.solution(x, 1.0);
            l2_error(&t, &traj.field(grid.steps).unwrap(), &exact, 20).unwrap()
        })
        .collect();
    let slope = loglog_slope(&dts, &temporal);
    vec![
        check(
            "spatial decay at t=1/2 and t=1",
            decays,
            format!("t=1/2 [{}], t=1 [{}]", short(&errors[0]).join(" "), short(&errors[1]).join(" ")),
        ),
        check("floor at most 1e-6", floor <= 1e-6, format!("{floor:.1e}")),
        check("temporal order", within(slope, 2.0, 0.1), format!("{slope:.3}")),
    ]
}

fn short(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.1e}")).collect()
}

fn eigenvalues() -> Vec<Check> {
    let t = Preset::Fundamental.tetrahedron();
    let degrees = [8usize, 12, 16, 20, 24];
    let exact = exact_tf_spectrum(5000);
    let mut maxes = Vec::new();
    let mut head_err = 0.0_f64;
    for &m in &degrees {
        let values = solve_eigen(&t, m, None).unwrap().values;
        maxes.push(*values.last().unwrap());
        if m == 24 {
            head_err = (0..5).map(|i| ((values[i] - exact[i]) / exact[i]).abs()).fold(0.0, f64::max);
        }
    }
    let ms: Vec<f64> = degrees.iter().map(|&m| m as f64).collect();
    let slope = loglog_slope(&ms, &maxes);
    let m = 32;
    let values = solve_eigen(&t, m, None).unwrap().values;
    let tol = 1.0 / m as f64;
    let reliable = values.iter().zip(&exact).filter(|(a, b)| ((*a - *b) / *b).abs() <= tol).count();
    let fraction = reliable as f64 / values.len() as f64;
    vec![
        check("first five at M=24", head_err <= 1e-8, format!("{head_err:.1e}")),
        check("largest eigenvalue exponent", within(slope, 4.0, 0.4), format!("{slope:.2} from {}", short(&maxes).join(" "))),
        check(
            "reliable fraction at M=32",
            (0.15..=0.25).contains(&fraction),
            format!("{fraction:.3} of {} within relative 1/M", values.len()),
        ),
    ]
}

fn cond2(a: &Mat<f64>) -> f64 {
    let ev = a.self_adjoint_eigenvalues(Side::Lower).unwrap();
    ev[ev.len() - 1] / ev[0]
}

fn conditioning() -> Vec<Check> {
    let t = Preset::Reference.tetrahedron();
    let degrees = [8usize, 12, 16, 20, 24];
    let conds: Vec<f64> = degrees.iter().map(|&m| cond2(&assemble_stiffness(&t, m).unwrap().to_dense())).collect();
    let ms: Vec<f64> = degrees.iter().map(|&m| m as f64).collect();
    let slope = loglog_slope(&ms, &conds);
    vec![check("stiffness condition exponent", (3.5..=4.5).contains(&slope), format!("{slope:.3} from {}", short(&conds).join(" ")))]
}

fn gaps() -> Vec<Check> {
    let s = exact_tf_spectrum(3000);
    let st = gap_stats(&s, Preset::Fundamental.tetrahedron().volume());
    let ks: Vec<f64> = (1..s.len()).map(|k| k as f64).collect();
    let slope = loglog_slope(&ks, &st.average_gaps);
    let below = st.normalized_gaps.iter().filter(|&&g| g < 0.25).count() as f64 / st.normalized_gaps.len() as f64;
    vec![
        check("average gap exponent", within(slope, -1.0 / 3.0, 0.05), format!("{slope:.4}")),
        check("normalized gaps below 0.25", below >= 0.5, format!("{below:.3}")),
    ]
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Vec<Check>); 10] = [
        (1, identities),
        (2, inverses),
        (3, clenshaw),
        (4, assembly),
        (5, sparsity),
        (6, convergence),
        (7, heat),
        (8, eigenvalues),
        (9, conditioning),
        (10, gaps),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let checks = run();
        let failed: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
        let undocumented = failed.iter().filter(|c| !DOCUMENTED.contains(&(id, c.name))).count();
        unexpected += undocumented;
        let status = match (failed.is_empty(), undocumented) {
            (true, _) => "PASS",
            (false, 0) => "FAIL (documented deviation)",
            _ => "FAIL",
        };
        let detail: Vec<String> = checks
            .iter()
            .map(|c| {
                let mark = if c.ok { "ok" } else { "MISS" };
                if c.detail.is_empty() {
                    format!("{} [{mark}]", c.name)
                } else {
                    format!("{} [{mark}] {}", c.name, c.detail)
                }
            })
            .collect();
        println!("criterion {id} {status}: {} ({:.1}s)", detail.join("; "), start.elapsed().as_secs_f64());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
