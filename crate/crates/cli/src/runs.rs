use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use faer::{Mat, Side};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use tetspec::analytic::{exact_tf_spectrum, gap_stats, loglog_slope, weyl_prediction};
use tetspec::assembly::{
    assemble_mass_const, assemble_stiffness, count_outside_band, sparsity_report, MASS_BLOCK_OFFSETS,
    STIFFNESS_BLOCK_OFFSETS, SUB_BAND,
};
use tetspec::koornwinder::{graded_size, koornwinder_eval_all};
use tetspec::recurrence::{Clenshaw, ExpansionCoeffs};
use tetspec::solvers::{crank_nicolson, l2_error, max_error, solve_eigen, solve_source, TimeGrid};
use tetspec::{Coefficient, Example, OpCounter, ParamVector, Preset, RefPoint};

use crate::args::{Cli, Command, CommonArgs, ConvergenceArgs, EigenArgs, GapsArgs, TemporalArgs};
use crate::output::{CliError, Row, RunDir};

const MAX_DEGREE_WITHOUT_LARGE: usize = 40;

pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let config = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::Convergence(a) => with_pool(a.common.threads, || convergence(a, config)),
        Command::Temporal(a) => with_pool(a.common.threads, || temporal(a, config)),
        Command::Eigen(a) => with_pool(a.common.threads, || eigen(a, config)),
        Command::Condition(a) => with_pool(a.threads, || condition(a, config)),
        Command::Sparsity(a) => with_pool(a.threads, || sparsity(a, config)),
        Command::Gaps(a) => gaps(a, config),
        Command::Clenshaw(a) => with_pool(a.threads, || clenshaw(a, config)),
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Argument(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// Runs `f` for every degree concurrently, keeping the input order.
fn sweep<T: Send>(
    degrees: &[usize],
    f: impl Fn(usize) -> Result<T, CliError> + Sync,
) -> Result<(Vec<T>, Value), CliError> {
    let out: Vec<(T, f64)> = degrees
        .par_iter()
        .map(|&m| {
            let start = Instant::now();
            f(m).map(|v| (v, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_, _>>()?;
    let timings: BTreeMap<String, f64> = degrees.iter().zip(&out).map(|(m, (_, s))| (m.to_string(), *s)).collect();
    Ok((out.into_iter().map(|(v, _)| v).collect(), json!(timings)))
}

fn slopes_by_metric(rows: &[Row]) -> Value {
    let mut series: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        if let Ok(k) = r.key.parse::<f64>() {
            let e = series.entry(r.metric.as_str()).or_default();
            e.0.push(k);
            e.1.push(r.value);
        }
    }
    let out: BTreeMap<&str, f64> =
        series.into_iter().filter(|(_, (x, _))| x.len() >= 2).map(|(k, (x, y))| (k, loglog_slope(&x, &y))).collect();
    json!(out)
}

fn convergence(a: &ConvergenceArgs, config: Value) -> Result<PathBuf, CliError> {
    let t = a.common.tetrahedron()?;
    let example = a.example()?;
    let degrees = a.common.degrees()?;
    let on_reference = a.common.preset()? == Some(Preset::Reference);
    let (rows, timings) = if example.is_time_dependent() {
        if !on_reference {
            return Err(CliError::Argument("example4 is posed on the reference tetrahedron only".into()));
        }
        let grid = TimeGrid::new(a.dt, a.tfinal)?;
        if grid.steps % 2 != 0 {
            return Err(CliError::Argument("tfinal / dt must be even to report the half time".into()));
        }
        let (per, timings) = sweep(&degrees, |m| {
            let f = |x: Vector3<f64>, s: f64| example.source(x, s);
            let u0 = |x: Vector3<f64>| example.solution(x, 0.0);
            let traj = crank_nicolson(&t, m, &f, &u0, grid)?;
            let mut rows = Vec::new();
            for n in [grid.steps / 2, grid.steps] {
                let time = grid.time(n);
                let field = traj.field(n)?;
                let exact = |x: Vector3<f64>| example.solution(x, time);
                rows.push(Row::new(m, format!("max_error@t={time}"), max_error(&t, &field, &exact)?));
                rows.push(Row::new(m, format!("l2_error@t={time}"), l2_error(&t, &field, &exact, m + 6)?));
            }
            Ok(rows)
        })?;
        (per.into_iter().flatten().collect::<Vec<_>>(), timings)
    } else {
        let homogeneous = on_reference && example.homogeneous_on_reference();
        let (per, timings) = sweep(&degrees, |m| {
            let f = |x: Vector3<f64>| example.source(x, 0.0);
            let u = |x: Vector3<f64>| example.solution(x, 0.0);
            let g = |x: Vector3<f64>| example.gamma(x);
            let gamma = match example.constant_gamma() {
                Some(c) => Coefficient::Constant(c),
                None => Coefficient::Field(&g),
            };
            let bc: Option<tetspec::Field> = if homogeneous { None } else { Some(&u) };
            let sol = solve_source(&t, m, gamma, &f, bc)?;
            let field = sol.field()?;
            Ok(vec![
                Row::new(m, "max_error", max_error(&t, &field, &u)?),
                Row::new(m, "l2_error", l2_error(&t, &field, &u, m + 6)?),
            ])
        })?;
        (per.into_iter().flatten().collect::<Vec<_>>(), timings)
    };
    let mut run = RunDir::create(&a.common.out)?;
    run.write_csv("convergence.csv", &rows)?;
    let summary = json!({ "example": example.name(), "loglog_slopes": slopes_by_metric(&rows) });
    run.finish("convergence", config, summary, timings)
}

fn temporal(a: &TemporalArgs, config: Value) -> Result<PathBuf, CliError> {
    let t = a.common.tetrahedron()?;
    if a.common.preset()? != Some(Preset::Reference) {
        return Err(CliError::Argument("the heat benchmark is posed on the reference tetrahedron only".into()));
    }
    let m = a.common.degrees()?[0];
    let example = Example::Example4;
    let grids = a.dt.iter().map(|&dt| TimeGrid::new(dt, a.tfinal)).collect::<Result<Vec<_>, _>>()?;
    let start = Instant::now();
    let rows = grids
        .par_iter()
        .map(|&grid| {
            let f = |x: Vector3<f64>, s: f64| example.source(x, s);
            let u0 = |x: Vector3<f64>| example.solution(x, 0.0);
            let traj = crank_nicolson(&t, m, &f, &u0, grid)?;
            let exact = |x: Vector3<f64>| example.solution(x, grid.final_time());
            let err = l2_error(&t, &traj.field(grid.steps)?, &exact, m + 6)?;
            Ok(Row::new(grid.dt, format!("l2_error@t={}", a.tfinal), err))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut run = RunDir::create(&a.common.out)?;
    run.write_csv("temporal.csv", &rows)?;
    let summary = json!({ "degree": m, "loglog_slopes": slopes_by_metric(&rows) });
    run.finish("temporal", config, summary, json!({ "total": start.elapsed().as_secs_f64() }))
}

fn reliable_fraction(numerical: &[f64], exact: &[f64], tol: f64) -> f64 {
    let n = numerical.len().min(exact.len());
    numerical.iter().zip(exact).filter(|(a, b)| ((*a - *b) / *b).abs() <= tol).count() as f64 / n as f64
}

fn eigen(a: &EigenArgs, config: Value) -> Result<PathBuf, CliError> {
    let t = a.common.tetrahedron()?;
    let degrees = a.common.degrees()?;
    if !a.large && degrees.iter().any(|&m| m > MAX_DEGREE_WITHOUT_LARGE) {
        return Err(CliError::Argument(format!("degrees above {MAX_DEGREE_WITHOUT_LARGE} need --large")));
    }
    let exact_available = a.common.preset()? == Some(Preset::Fundamental);
    let top = *degrees.iter().max().unwrap_or(&4);
    let reference: Vec<f64> = if exact_available {
        let dim = (top.saturating_sub(1)) * top.saturating_sub(2) * top.saturating_sub(3) / 6;
        exact_tf_spectrum(dim.max(5))
    } else {
        let m_ref = a.reference_degree.unwrap_or(top + 4);
        solve_eigen(&t, m_ref, Some(5))?.values
    };
    let (spectra, timings) = sweep(&degrees, |m| Ok(solve_eigen(&t, m, None)?.values))?;
    let mut rows = Vec::new();
    let mut fractions = BTreeMap::new();
    for (&m, values) in degrees.iter().zip(&spectra) {
        for i in 0..5.min(values.len()) {
            rows.push(Row::new(m, format!("mu_{}", i + 1), values[i]));
            rows.push(Row::new(m, format!("rel_error_{}", i + 1), ((values[i] - reference[i]) / reference[i]).abs()));
        }
        rows.push(Row::new(m, "mu_max", *values.last().unwrap_or(&f64::NAN)));
        if exact_available {
            for &c in &a.threshold {
                let f = reliable_fraction(values, &reference, c / m as f64);
                rows.push(Row::new(m, format!("reliable_fraction_C={c}"), f));
                fractions.insert(format!("M={m},C={c}"), f);
            }
        }
    }
    let mut run = RunDir::create(&a.common.out)?;
    run.write_csv("eigen.csv", &rows)?;
    if let Some(values) = spectra.last() {
        let m = degrees[degrees.len() - 1];
        let mut spec_rows = Vec::with_capacity(values.len() * 3);
        for (k, &mu) in values.iter().enumerate() {
            spec_rows.push(Row::new(k + 1, "numerical", mu));
            spec_rows.push(Row::new(k + 1, "weyl", weyl_prediction(k + 1, t.volume(), t.surface_area())));
            if exact_available {
                spec_rows.push(Row::new(k + 1, "exact", reference[k]));
                spec_rows.push(Row::new(k + 1, "rel_error", ((mu - reference[k]) / reference[k]).abs()));
            }
        }
        run.write_csv(&format!("spectrum_M{m}.csv"), &spec_rows)?;
    }
    let maxes: Vec<f64> = spectra.iter().map(|v| *v.last().unwrap_or(&f64::NAN)).collect();
    let ms: Vec<f64> = degrees.iter().map(|&m| m as f64).collect();
    let summary = json!({
        "reference": if exact_available { "exact fundamental spectrum" } else { "high-degree numerical" },
        "largest_eigenvalue_slope": if ms.len() >= 2 { json!(loglog_slope(&ms, &maxes)) } else { Value::Null },
        "reliable_fractions": fractions,
    });
    run.finish("eigen", config, summary, timings)
}

fn cond2(a: &Mat<f64>, jacobi: bool) -> Result<f64, CliError> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| if jacobi { 1.0 / a[(i, i)].sqrt() } else { 1.0 }).collect();
    let b = Mat::from_fn(n, n, |i, j| d[i] * a[(i, j)] * d[j]);
    let ev = b
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| tetspec::Error::EigenFailure(format!("{e:?}")))?;
    Ok(ev[n - 1] / ev[0])
}

fn condition(a: &CommonArgs, config: Value) -> Result<PathBuf, CliError> {
    let t = a.tetrahedron()?;
    let degrees = a.degrees()?;
    let (per, timings) = sweep(&degrees, |m| {
        let s = assemble_stiffness(&t, m)?;
        let mass = assemble_mass_const(&t, m, 1.0);
        let sum = s.add_scaled(&mass, 1.0);
        let mut rows = Vec::new();
        for (name, mat) in [("S", &s), ("M", &mass), ("S+M", &sum)] {
            let d = mat.to_dense();
            rows.push(Row::new(m, format!("cond_{name}"), cond2(&d, false)?));
            rows.push(Row::new(m, format!("cond_{name}_diag_scaled"), cond2(&d, true)?));
        }
        Ok(rows)
    })?;
    let rows: Vec<Row> = per.into_iter().flatten().collect();
    let mut run = RunDir::create(&a.out)?;
    run.write_csv("condition.csv", &rows)?;
    run.finish("condition", config, json!({ "loglog_slopes": slopes_by_metric(&rows) }), timings)
}

fn sparsity(a: &CommonArgs, config: Value) -> Result<PathBuf, CliError> {
    let t = a.tetrahedron()?;
    let degrees = a.degrees()?;
    let mut run = RunDir::create(&a.out)?;
    let mut rows = Vec::new();
    let mut reports = BTreeMap::new();
    let mut timings = BTreeMap::new();
    for m in degrees {
        let start = Instant::now();
        let s = assemble_stiffness(&t, m)?;
        let mass = assemble_mass_const(&t, m, 1.0);
        run.write_with(&format!("stiffness_M{m}.mtx"), |w| s.write_matrix_market(w))?;
        run.write_with(&format!("mass_M{m}.mtx"), |w| mass.write_matrix_market(w))?;
        let out_s = count_outside_band(m, &s, &STIFFNESS_BLOCK_OFFSETS, SUB_BAND);
        let out_m = count_outside_band(m, &mass, &MASS_BLOCK_OFFSETS, SUB_BAND);
        rows.push(Row::new(m, "dim", s.dim() as f64));
        rows.push(Row::new(m, "nnz_S", s.nnz() as f64));
        rows.push(Row::new(m, "nnz_M", mass.nnz() as f64));
        rows.push(Row::new(m, "outside_band_S", out_s as f64));
        rows.push(Row::new(m, "outside_band_M", out_m as f64));
        reports.insert(m.to_string(), json!({ "S": sparsity_report(m, &s), "M": sparsity_report(m, &mass) }));
        timings.insert(m.to_string(), start.elapsed().as_secs_f64());
    }
    run.write_csv("sparsity.csv", &rows)?;
    let summary = json!({
        "stiffness_block_offsets": STIFFNESS_BLOCK_OFFSETS,
        "mass_block_offsets": MASS_BLOCK_OFFSETS,
        "sub_band_half_width": SUB_BAND,
        "reports": reports,
    });
    run.finish("sparsity", config, summary, json!(timings))
}

fn gaps(a: &GapsArgs, config: Value) -> Result<PathBuf, CliError> {
    if a.count < 3 {
        return Err(CliError::Argument("gap statistics need at least three eigenvalues".into()));
    }
    let start = Instant::now();
    let t = Preset::Fundamental.tetrahedron();
    let spectrum = exact_tf_spectrum(a.count);
    let stats = gap_stats(&spectrum, t.volume());
    let mut rows = Vec::with_capacity(3 * a.count);
    for k in 1..a.count {
        rows.push(Row::new(k, "average_gap", stats.average_gaps[k - 1]));
        rows.push(Row::new(k, "normalized_gap", stats.normalized_gaps[k - 1]));
    }
    let hist: Vec<Row> = stats
        .histogram
        .iter()
        .enumerate()
        .map(|(b, &v)| Row::new((b as f64 + 0.5) * stats.histogram_width, "density", v))
        .collect();
    let ks: Vec<f64> = (1..a.count).map(|k| k as f64).collect();
    let below = stats.normalized_gaps.iter().filter(|&&g| g < 0.25).count() as f64 / stats.normalized_gaps.len() as f64;
    let mut run = RunDir::create(&a.out)?;
    run.write_csv("gaps.csv", &rows)?;
    run.write_csv("gap_histogram.csv", &hist)?;
    let summary = json!({
        "average_gap_slope": loglog_slope(&ks, &stats.average_gaps),
        "fraction_normalized_gaps_below_0.25": below,
    });
    run.finish("gaps", config, summary, json!({ "total": start.elapsed().as_secs_f64() }))
}

fn clenshaw(a: &CommonArgs, config: Value) -> Result<PathBuf, CliError> {
    let degrees = a.degrees()?;
    let seed = a.seed;
    let (per, timings) = sweep(&degrees, |m| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ m as u64);
        let coeffs: Vec<f64> = (0..graded_size(m)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ex = ExpansionCoeffs::from_graded(m, &coeffs)?;
        let cl = Clenshaw::new(ParamVector::ZERO, m);
        cl.prepare()?;
        let mut worst = 0.0_f64;
        let mut ops = OpCounter::default();
        for _ in 0..30 {
            let (u, v, w): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let p = RefPoint::new(u * (1.0 - v) * (1.0 - w), v * (1.0 - w), w * 0.999);
            let mut single = OpCounter::default();
            let got = cl.eval_counted(&ex, p, &mut single)?;
            ops = single;
            let terms: Vec<f64> =
                koornwinder_eval_all(m, ParamVector::ZERO, p).iter().zip(&coeffs).map(|(v, c)| v * c).collect();
            let naive: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|v| v.abs()).sum();
            worst = worst.max((got - naive).abs() / scale);
        }
        let mf = m as f64;
        Ok(vec![
            Row::new(m, "ops_per_point", ops.0 as f64),
            Row::new(m, "ops_reference", 53.0 * mf.powi(3) / 6.0),
            Row::new(m, "max_relative_difference", worst),
        ])
    })?;
    let rows: Vec<Row> = per.into_iter().flatten().collect();
    let mut run = RunDir::create(&a.out)?;
    run.write_csv("clenshaw.csv", &rows)?;
    run.finish("clenshaw", config, json!({ "seed": seed, "loglog_slopes": slopes_by_metric(&rows) }), timings)
}

