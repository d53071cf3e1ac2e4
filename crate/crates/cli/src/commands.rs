//! One function per subcommand: each runs the corresponding library
//! operation, writes its artifacts, and returns a mathematical verdict plus
//! the numbers for the report.

use affine_spectra_core::digits::{attractor_radius_bound, sample_attractor};
use affine_spectra_core::fourier::z_set_scan;
use affine_spectra_core::frames::{
    exhaustive_subset_search, frame_bounds, greedy_subset_search, step_frame_check,
    tower_frame_bounds,
};
use affine_spectra_core::hadamard::{verify_triple, VerifyOutcome};
use affine_spectra_core::lattice::{invariant_lattice, reduce_pair, Hnf, IntMatrix, IntVector};
use affine_spectra_core::spectra::{build_lambda, delta_lambda, jp_check, SpectrumPlan};
use affine_spectra_core::Error;
use anyhow::{bail, Result};
use serde_json::{json, Value};

use crate::config::ProblemConfig;
use crate::report::{fmt_f64, integer_vectors_csv, frame_report_text, ArtifactSink, Verdict};

/// Budget for exact digit/point enumerations.
const EXPANSION_CAP: u128 = 1 << 20;
/// Largest dense Gram (and tower) size N^n.
const GRAM_CAP: u128 = 4096;
/// Largest scan grid (points).
const SCAN_CAP: u128 = 1 << 22;
/// Subset-enumeration budget; past it only the greedy search runs.
const SUBSET_CAP: u128 = 5_000_000;
/// Denominator limit for the exact zero-candidate pass of the scan.
const EXACT_DENOMINATOR_LIMIT: u32 = 12;
/// Per-term transform tolerance used inside packing/separation checks.
const MU_TOL: f64 = 1e-12;
/// Work budget for packing checks: |Lambda| * grid points.
const PACKING_CAP: u128 = 1 << 22;

/// A validated problem with its exact integer data.
pub struct Problem {
    pub config: ProblemConfig,
    pub r: IntMatrix,
    pub b: Vec<IntVector>,
    pub l: Option<Vec<IntVector>>,
}

impl Problem {
    pub fn new(config: ProblemConfig) -> Problem {
        let r = config.dilation();
        let b = config.digits();
        let l = config.dual_digits();
        Problem { config, r, b, l }
    }

    fn dual(&self) -> Result<&[IntVector]> {
        match &self.l {
            Some(l) => Ok(l),
            None => bail!("this command needs a dual digit set: add `l` to the config"),
        }
    }
}

fn vectors_value(vs: &[IntVector]) -> Value {
    let rows: Vec<Vec<String>> = vs
        .iter()
        .map(|v| v.coords.iter().map(|c| c.to_string()).collect())
        .collect();
    json!(rows)
}

fn matrix_value(m: &IntMatrix) -> Value {
    let d = m.dim();
    let rows: Vec<Vec<String>> = (0..d)
        .map(|i| (0..d).map(|j| m.entry(i, j).to_string()).collect())
        .collect();
    json!(rows)
}

fn point_string(coords: &[String]) -> String {
    format!("({})", coords.join(", "))
}

pub fn cmd_verify_triple(p: &Problem, tol: f64, _sink: &mut ArtifactSink) -> Result<(Verdict, Value)> {
    let l = p.dual()?;
    match verify_triple(&p.r, &p.b, l, tol)? {
        VerifyOutcome::Accepted(triple) => Ok((
            Verdict::Pass,
            json!({"deviation": triple.deviation, "size": triple.b.len()}),
        )),
        VerifyOutcome::Rejected { deviation, b_simple, l_simple } => {
            let mut why = vec![format!("deviation {}", fmt_f64(deviation))];
            if !b_simple {
                why.push("digits share a residue class".into());
            }
            if !l_simple {
                why.push("dual digits share a residue class".into());
            }
            Ok((
                Verdict::Fail(format!("triple rejected: {}", why.join("; "))),
                json!({"deviation": deviation, "b_simple": b_simple, "l_simple": l_simple}),
            ))
        }
    }
}

pub fn cmd_lattice_info(p: &Problem, _sink: &mut ArtifactSink) -> Result<(Verdict, Value)> {
    let lat = invariant_lattice(&p.r, &p.b);
    let mut details = json!({
        "rank": lat.rank,
        "full_rank": lat.full_rank,
        "equals_standard_lattice": lat.equals_zd,
        "translation": lat.translation.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "basis_columns": vectors_value(&lat.hnf.basis),
    });
    match reduce_pair(&p.r, &p.b) {
        Ok(reduced) => {
            details["reduced"] = json!({
                "rank": reduced.rank,
                "r": matrix_value(&reduced.r),
                "b": vectors_value(&reduced.b),
                "m": matrix_value(&reduced.m),
            });
            Ok((Verdict::Pass, details))
        }
        Err(Error::NotSimpleDigitSet { first, second }) => Ok((
            Verdict::Fail(format!(
                "digits {first:?} and {second:?} share a residue class; reduction is impossible"
            )),
            details,
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_attractor(p: &Problem, depth: u32, sink: &mut ArtifactSink) -> Result<(Verdict, Value)> {
    let sample = sample_attractor(&p.r, &p.b, depth, EXPANSION_CAP)?;
    let radius = attractor_radius_bound(&p.r, &p.b)?;
    let d = p.r.dim();
    let mut csv = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    csv.push_str(&header.join(","));
    csv.push_str(",word\n");
    for (point, coords) in sample.points.iter().zip(sample.points_f64()) {
        for c in &coords {
            csv.push_str(&fmt_f64(*c));
            csv.push(',');
        }
        let word: Vec<String> = point.word.iter().map(|i| i.to_string()).collect();
        csv.push_str(&word.join("-"));
        csv.push('\n');
    }
    sink.write("attractor.csv", &csv)?;
    Ok((
        Verdict::Pass,
        json!({"depth": depth, "points": sample.points.len(), "radius_bound": radius}),
    ))
}

pub fn cmd_zero_scan(
    p: &Problem,
    grid: u32,
    window: i64,
    tol: f64,
    sink: &mut ArtifactSink,
) -> Result<(Verdict, Value)> {
    let report = z_set_scan(&p.r, &p.b, grid, window, tol, EXACT_DENOMINATOR_LIMIT, SCAN_CAP)?;
    let d = p.r.dim();
    let mut csv = String::new();
    let mut header: Vec<String> = (1..=d).map(|i| format!("xi{i}")).collect();
    header.extend((1..=d).map(|i| format!("best_k{i}")));
    header.push("abs_mu_hat".into());
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in &report.rows {
        let mut cells: Vec<String> = row.xi.iter().map(|x| fmt_f64(*x)).collect();
        cells.extend(row.best_k.iter().map(|k| k.to_string()));
        cells.push(fmt_f64(row.abs_mu_hat));
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    sink.write("scan.csv", &csv)?;

    let details = json!({
        "grid": report.grid_resolution,
        "window": report.window,
        "min_max_abs": report.min_max_abs,
        "argmin": report.argmin,
        "lipschitz": report.lipschitz,
    });
    match &report.obstruction {
        Some(witness) => {
            let coords: Vec<String> = witness.point.iter().map(|c| c.to_string()).collect();
            Ok((
                Verdict::Fail(format!(
                    "obstruction at {}: every translate in the window is a certified zero",
                    point_string(&coords)
                )),
                details,
            ))
        }
        None => Ok((Verdict::Pass, details)),
    }
}

/// The default construction plan: `k` depth-1 stages over the dual digits.
fn uniform_plan(p: &Problem, k: usize) -> Result<std::result::Result<SpectrumPlan, Verdict>> {
    let l = p.dual()?;
    match SpectrumPlan::uniform(p.r.clone(), p.b.clone(), l, k) {
        Ok(plan) => Ok(Ok(plan)),
        Err(Error::CollisionDetected { first, second }) => Ok(Err(Verdict::Fail(format!(
            "stage digits {first:?} and {second:?} collide modulo the dilation"
        )))),
        Err(e) => Err(e.into()),
    }
}

fn built_lambda(plan: &SpectrumPlan, k: usize) -> Result<std::result::Result<Vec<IntVector>, Verdict>> {
    match build_lambda(plan, k, EXPANSION_CAP) {
        Ok(lambda) => Ok(Ok(lambda)),
        Err(Error::CollisionDetected { first, second }) => Ok(Err(Verdict::Fail(format!(
            "candidate frequencies {first:?} and {second:?} coincide"
        )))),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_spectrum_build(p: &Problem, k: usize, sink: &mut ArtifactSink) -> Result<(Verdict, Value)> {
    let plan = match uniform_plan(p, k)? {
        Ok(plan) => plan,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let lambda = match built_lambda(&plan, k)? {
        Ok(lambda) => lambda,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    sink.write("lambda.csv", &integer_vectors_csv("l", &lambda))?;
    let max_abs = lambda
        .iter()
        .flat_map(|v| v.coords.iter())
        .map(|c| c.magnitude().clone())
        .max()
        .map(|m| m.to_string())
        .unwrap_or_else(|| "0".into());
    Ok((
        Verdict::Pass,
        json!({"stages": k, "size": lambda.len(), "max_abs_coordinate": max_abs}),
    ))
}

/// All d-fold grid points {0, 1/grid, ..., (grid-1)/grid}^d.
fn grid_points(d: usize, grid: u32) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * grid as usize);
        for base in &out {
            for i in 0..grid {
                let mut v = base.clone();
                v.push(i as f64 / grid as f64);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn cmd_jp_check(
    p: &Problem,
    k: usize,
    grid: u32,
    sink: &mut ArtifactSink,
) -> Result<(Verdict, Value)> {
    let plan = match uniform_plan(p, k)? {
        Ok(plan) => plan,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let lambda = match built_lambda(&plan, k)? {
        Ok(lambda) => lambda,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let d = p.r.dim();
    let points = grid_points(d, grid);
    let work = (lambda.len() as u128) * (points.len() as u128);
    if work > PACKING_CAP {
        bail!(
            "packing check needs {work} transform evaluations (cap {PACKING_CAP}); lower --K or --grid"
        );
    }
    match jp_check(&p.r, &p.b, &lambda, &points, MU_TOL) {
        Err(Error::NotOrthogonal { first, second, value, tol }) => Ok((
            Verdict::Fail(format!(
                "frequencies {first:?} and {second:?} are not orthogonal: |transform| = {value:.3e} > {tol:.3e}"
            )),
            json!({"stages": k, "size": lambda.len()}),
        )),
        Err(e) => Err(e.into()),
        Ok(report) => {
            let mut csv = String::new();
            let mut header: Vec<String> = (1..=d).map(|i| format!("xi{i}")).collect();
            header.push("q".into());
            csv.push_str(&header.join(","));
            csv.push('\n');
            for (xi, q) in points.iter().zip(&report.q_values) {
                let mut cells: Vec<String> = xi.iter().map(|x| fmt_f64(*x)).collect();
                cells.push(fmt_f64(*q));
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
            sink.write("packing.csv", &csv)?;

            let min_q = report.q_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_q = report.q_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let details = json!({
                "stages": k,
                "size": report.lambda_len,
                "min_q": min_q,
                "max_q": max_q,
                "max_offdiag": report.max_offdiag,
            });
            if max_q > 1.0 + 1e-9 {
                Ok((
                    Verdict::Fail(format!("packing exceeds one: max Q = {}", fmt_f64(max_q))),
                    details,
                ))
            } else {
                Ok((Verdict::Pass, details))
            }
        }
    }
}

pub fn cmd_delta(p: &Problem, k: usize, sink: &mut ArtifactSink) -> Result<(Verdict, Value)> {
    let plan = match uniform_plan(p, k)? {
        Ok(plan) => plan,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let report = match delta_lambda(&plan, k, MU_TOL, EXPANSION_CAP) {
        Ok(report) => report,
        Err(Error::CollisionDetected { first, second }) => {
            return Ok((
                Verdict::Fail(format!(
                    "candidate frequencies {first:?} and {second:?} coincide"
                )),
                json!({"stages": k}),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let mut text = String::new();
    for (i, m) in report.stage_minima.iter().enumerate() {
        text.push_str(&format!("stage {} min {}\n", i + 1, fmt_f64(*m)));
    }
    text.push_str(&format!("delta {}\n", fmt_f64(report.delta)));
    if let Some((eps0, delta0)) = report.constants {
        text.push_str(&format!("epsilon0 {}\ndelta0 {}\n", fmt_f64(eps0), fmt_f64(delta0)));
    }
    sink.write("delta.txt", &text)?;
    let details = json!({
        "stages": k,
        "delta": report.delta,
        "stage_minima": report.stage_minima,
    });
    if report.delta > 0.0 {
        Ok((Verdict::Pass, details))
    } else {
        Ok((
            Verdict::Fail("separation collapsed: a candidate frequency hits a transform zero".into()),
            details,
        ))
    }
}

pub fn cmd_frame_bounds(
    p: &Problem,
    depth: u32,
    tol: f64,
    sink: &mut ArtifactSink,
) -> Result<(Verdict, Value)> {
    if let Some(l) = &p.l {
        let triple = match verify_triple(&p.r, &p.b, l, tol)? {
            VerifyOutcome::Accepted(triple) => triple,
            VerifyOutcome::Rejected { deviation, .. } => {
                return Ok((
                    Verdict::Fail(format!(
                        "pair is not compatible at tolerance {tol:.1e} (deviation {}); no tower certificate",
                        fmt_f64(deviation)
                    )),
                    json!({"deviation": deviation}),
                ))
            }
        };
        let cert = tower_frame_bounds(&triple, depth, GRAM_CAP)?;
        sink.write("frame_report.txt", &frame_report_text(&cert.report))?;
        let details = json!({
            "method": cert.report.method,
            "depth": depth,
            "size": cert.size.to_string(),
            "frobenius": cert.frobenius,
            "sigma2_min": cert.report.sigma2_min,
            "sigma2_max": cert.report.sigma2_max,
            "epsilon": cert.report.epsilon,
        });
        if cert.report.sigma2_min > 0.0 {
            Ok((Verdict::Pass, details))
        } else {
            Ok((
                Verdict::Fail("certified enclosure does not keep the lower frame bound positive".into()),
                details,
            ))
        }
    } else {
        let rt_n = p.r.transpose().pow(depth);
        let pool = Hnf::of_matrix(&rt_n).residues(SCAN_CAP)?;
        let report = frame_bounds(&p.r, &p.b, depth, &pool, GRAM_CAP)?;
        sink.write("frame_report.txt", &frame_report_text(&report))?;
        let details = json!({
            "method": report.method,
            "depth": depth,
            "rows": pool.len(),
            "sigma2_min": report.sigma2_min,
            "sigma2_max": report.sigma2_max,
            "epsilon": report.epsilon,
        });
        if report.sigma2_min > 0.0 {
            Ok((Verdict::Pass, details))
        } else {
            Ok((Verdict::Fail("least squared singular value is zero".into()), details))
        }
    }
}

pub fn cmd_frame_search(
    p: &Problem,
    depth: u32,
    size: Option<usize>,
    seed: u64,
    sink: &mut ArtifactSink,
) -> Result<(Verdict, Value)> {
    let rt_n = p.r.transpose().pow(depth);
    let pool = Hnf::of_matrix(&rt_n).residues(SCAN_CAP)?;
    let n_pow = (p.b.len() as u128)
        .checked_pow(depth)
        .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap: GRAM_CAP })?;
    let s = match size {
        Some(s) => s,
        None => usize::try_from(n_pow)
            .map_err(|_| Error::BudgetExceeded { needed: n_pow, cap: GRAM_CAP })?,
    };
    let report = match exhaustive_subset_search(&p.r, &p.b, depth, &pool, s, SUBSET_CAP) {
        Ok(report) => report,
        Err(Error::BudgetExceeded { .. }) => {
            greedy_subset_search(&p.r, &p.b, depth, &pool, s, seed, 8)?
        }
        Err(e) => return Err(e.into()),
    };
    sink.write("frame_report.txt", &frame_report_text(&report))?;
    let details = json!({
        "method": report.method,
        "depth": depth,
        "pool": pool.len(),
        "size": s,
        "j_set": vectors_value(&report.j_set),
        "sigma2_min": report.sigma2_min,
        "sigma2_max": report.sigma2_max,
        "epsilon": report.epsilon,
    });
    if report.sigma2_min > 0.0 {
        Ok((Verdict::Pass, details))
    } else {
        Ok((
            Verdict::Fail("no selected subset kept the least squared singular value positive".into()),
            details,
        ))
    }
}

pub fn cmd_step_check(
    p: &Problem,
    k: usize,
    depth: u32,
    trials: u32,
    seed: u64,
    sink: &mut ArtifactSink,
) -> Result<(Verdict, Value)> {
    let plan = match uniform_plan(p, k)? {
        Ok(plan) => plan,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let lambda = match built_lambda(&plan, k)? {
        Ok(lambda) => lambda,
        Err(verdict) => return Ok((verdict, json!({"stages": k}))),
    };
    let report = step_frame_check(
        &p.r,
        &p.b,
        &lambda,
        depth,
        k as u32,
        trials,
        seed,
        MU_TOL,
        EXPANSION_CAP,
    )?;
    let text = format!(
        "level {}\ntrials {}\nmin_ratio {}\nmax_ratio {}\nmean_ratio {}\n",
        report.level,
        report.trials,
        fmt_f64(report.min_ratio),
        fmt_f64(report.max_ratio),
        fmt_f64(report.mean_ratio),
    );
    sink.write("step_check.txt", &text)?;
    let details = json!({
        "stages": k,
        "level": report.level,
        "trials": report.trials,
        "min_ratio": report.min_ratio,
        "max_ratio": report.max_ratio,
        "mean_ratio": report.mean_ratio,
    });
    if report.max_ratio <= 1.0 + 1e-6 {
        Ok((Verdict::Pass, details))
    } else {
        Ok((
            Verdict::Fail(format!(
                "energy ratio exceeds one: max {}",
                fmt_f64(report.max_ratio)
            )),
            details,
        ))
    }
}
