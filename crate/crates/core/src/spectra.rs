//! Staged construction of candidate frequency sets: plans made of leveled
//! digit stages, integer corrections chosen by translate search, separation
//! constants with certified slack, and the quadratic packing check that
//! certifies completeness evidence for a finished set.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::digits::{attractor_radius_bound, InversePowerEnvelope, DEFAULT_BUDGET_CAP};
use crate::error::{Error, Result};
use crate::fourier::{certified_zero, integer_window, product_form, FourierEvaluator};
use crate::lattice::{Hnf, IntMatrix, IntVector};

/// One stage of a frequency-set plan: a digit set at depth `level`, plus an
/// integer correction per digit. The effective digit used in sums is
/// `j + (R^T)^level k(j)`, which never changes the residue of `j` modulo
/// `(R^T)^level Z^d`.
#[derive(Debug, Clone)]
pub struct Stage {
    /// Depth contributed by this stage.
    pub level: u32,
    /// Digit set for the stage, sorted; must contain the zero vector.
    pub j_set: Vec<IntVector>,
    /// Corrections paired index-by-index with `j_set`; zero at the zero digit.
    pub corrections: Vec<IntVector>,
}

impl Stage {
    /// Builds a stage whose corrections are all zero.
    pub fn uncorrected(level: u32, j_set: Vec<IntVector>) -> Stage {
        let corrections = j_set.iter().map(|j| IntVector::zero(j.dim())).collect();
        Stage { level, j_set, corrections }
    }
}

/// A staged plan for a candidate frequency set of the pair `(R, B)`.
///
/// Stage `i` contributes digits shifted by `(R^T)^{m_i}` where `m_i` is the
/// total depth of the preceding stages, so the partial sets are nested and
/// elements stay distinct as long as each stage has distinct residues modulo
/// `(R^T)^{level} Z^d`.
#[derive(Debug, Clone)]
pub struct SpectrumPlan {
    /// Expanding integer base matrix.
    pub r: IntMatrix,
    /// Digit set of the measure the plan certifies against.
    pub b: Vec<IntVector>,
    /// Plan stages, in application order.
    pub stages: Vec<Stage>,
    /// `(epsilon0, delta0)` recorded by the most recent stage correction.
    pub constants: Option<(f64, f64)>,
}

fn small_coords(v: &IntVector) -> Vec<i64> {
    v.to_i64().expect("frequency coordinates fit in i64 at certification scale")
}

impl SpectrumPlan {
    /// Validates and stores a plan. Each stage must contain the zero digit
    /// with a zero correction, have one correction per digit, and have
    /// distinct residues modulo `(R^T)^{level} Z^d`
    /// ([`Error::CollisionDetected`] otherwise).
    pub fn new(r: IntMatrix, b: Vec<IntVector>, stages: Vec<Stage>) -> Result<SpectrumPlan> {
        if !crate::lattice::is_expansive(&r)? {
            return Err(Error::NonExpansive);
        }
        let d = r.dim();
        let rt = r.transpose();
        let mut sorted_stages = Vec::with_capacity(stages.len());
        for stage in stages {
            if stage.level == 0 {
                return Err(Error::Unsupported("stage level must be at least 1".into()));
            }
            if stage.j_set.is_empty() {
                return Err(Error::Unsupported("stage digit set is empty".into()));
            }
            if stage.j_set.len() != stage.corrections.len() {
                return Err(Error::Unsupported(format!(
                    "stage has {} digits but {} corrections",
                    stage.j_set.len(),
                    stage.corrections.len()
                )));
            }
            for v in stage.j_set.iter().chain(stage.corrections.iter()) {
                if v.dim() != d {
                    return Err(Error::Unsupported(format!(
                        "stage vector dimension {} differs from base dimension {d}",
                        v.dim()
                    )));
                }
            }
            let mut pairs: Vec<(IntVector, IntVector)> = stage
                .j_set
                .into_iter()
                .zip(stage.corrections)
                .collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            let zero = IntVector::zero(d);
            match pairs.iter().find(|(j, _)| *j == zero) {
                None => {
                    return Err(Error::Unsupported(
                        "stage digit set must contain the zero vector".into(),
                    ))
                }
                Some((_, k)) if !k.is_zero() => {
                    return Err(Error::Unsupported(
                        "the zero digit must carry a zero correction".into(),
                    ))
                }
                Some(_) => {}
            }
            let hnf = Hnf::of_matrix(&rt.pow(stage.level));
            let mut seen: HashMap<IntVector, &IntVector> = HashMap::new();
            for (j, _) in &pairs {
                let residue = hnf.reduce(j);
                if let Some(prev) = seen.insert(residue, j) {
                    return Err(Error::CollisionDetected {
                        first: small_coords(prev),
                        second: small_coords(j),
                    });
                }
            }
            let (j_set, corrections) = pairs.into_iter().unzip();
            sorted_stages.push(Stage { level: stage.level, j_set, corrections });
        }
        Ok(SpectrumPlan { r, b, stages: sorted_stages, constants: None })
    }

    /// Stores a plan without residue validation; partial sets built from it
    /// may collide, which downstream checks surface honestly.
    pub fn new_unchecked(r: IntMatrix, b: Vec<IntVector>, stages: Vec<Stage>) -> SpectrumPlan {
        SpectrumPlan { r, b, stages, constants: None }
    }

    /// Convenience plan: `count` identical depth-1 stages over `j_set`.
    pub fn uniform(
        r: IntMatrix,
        b: Vec<IntVector>,
        j_set: &[IntVector],
        count: usize,
    ) -> Result<SpectrumPlan> {
        let stages = (0..count)
            .map(|_| Stage::uncorrected(1, j_set.to_vec()))
            .collect();
        SpectrumPlan::new(r, b, stages)
    }

    /// Total depth `m_k` contributed by the first `k` stages.
    pub fn depth(&self, k: usize) -> u32 {
        self.stages[..k].iter().map(|s| s.level).sum()
    }

    /// Effective digits of stage `i`: `j + (R^T)^level k(j)`.
    pub fn effective_digits(&self, i: usize) -> Vec<IntVector> {
        let stage = &self.stages[i];
        let rt_n = self.r.transpose().pow(stage.level);
        stage
            .j_set
            .iter()
            .zip(&stage.corrections)
            .map(|(j, k)| j.add(&rt_n.apply(k)))
            .collect()
    }
}

/// The partial frequency set after `k` stages:
/// `J_1 + (R^T)^{m_1} J_2 + ... + (R^T)^{m_{k-1}} J_k` over effective digits,
/// sorted. Errors: [`Error::BudgetExceeded`] when the product of stage sizes
/// exceeds `cap`, [`Error::CollisionDetected`] when two of the sums coincide.
pub fn build_lambda(plan: &SpectrumPlan, k: usize, cap: u128) -> Result<Vec<IntVector>> {
    if k > plan.stages.len() {
        return Err(Error::Unsupported(format!(
            "plan has {} stages, stage {k} requested",
            plan.stages.len()
        )));
    }
    let mut needed: u128 = 1;
    for stage in &plan.stages[..k] {
        needed = needed
            .checked_mul(stage.j_set.len() as u128)
            .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
    }
    if needed > cap {
        return Err(Error::BudgetExceeded { needed, cap });
    }

    let d = plan.r.dim();
    let rt = plan.r.transpose();
    let mut acc = vec![IntVector::zero(d)];
    for i in 0..k {
        let shift = rt.pow(plan.depth(i));
        let digits = plan.effective_digits(i);
        let mut next = Vec::with_capacity(acc.len() * digits.len());
        for base in &acc {
            for digit in &digits {
                next.push(base.add(&shift.apply(digit)));
            }
        }
        acc = next;
    }
    acc.sort();
    for w in acc.windows(2) {
        if w[0] == w[1] {
            return Err(Error::CollisionDetected {
                first: small_coords(&w[0]),
                second: small_coords(&w[1]),
            });
        }
    }
    Ok(acc)
}

fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_norm(lambda: &[IntVector]) -> f64 {
    lambda
        .iter()
        .map(|v| euclidean_norm(&v.to_f64()))
        .fold(0.0f64, f64::max)
}

/// Minimal depth `n` whose certified tail bound satisfies
/// `sup_{p >= 0} ||(R^T)^{-(n+p)}|| * max ||lambda|| < eps0`.
///
/// The 2-norm of a matrix equals the 2-norm of its transpose, so the inverse
/// power envelope of `R` certifies the transpose powers as well.
pub fn choose_next_n(lambda: &[IntVector], eps0: f64, r: &IntMatrix) -> Result<u32> {
    if eps0 <= 0.0 {
        return Err(Error::Unsupported("eps0 must be positive".into()));
    }
    let env = InversePowerEnvelope::new(r)?;
    let max_lambda = max_norm(lambda);
    for n in 1..=10_000u32 {
        if env.tail_sup_bound(n) * max_lambda < eps0 {
            return Ok(n);
        }
    }
    Err(Error::Unsupported(
        "no depth within 10000 satisfies the tail bound; eps0 is too small".into(),
    ))
}

/// One row of the translate table: the exact sample, its maximizing integer
/// translate inside the search window, and the squared transform modulus
/// there.
#[derive(Debug, Clone)]
pub struct KxEntry {
    /// Sample point, exact.
    pub x: Vec<BigRational>,
    /// Maximizing translate.
    pub k: Vec<i64>,
    /// Squared transform modulus at `x + k`.
    pub value_sq: f64,
}

/// Separation constants estimated over a sample of the fundamental domain.
#[derive(Debug, Clone)]
pub struct LemmaConstants {
    /// Covering radius of the sample set: half the grid spacing.
    pub epsilon0: f64,
    /// Lower bound for the squared transform modulus at the best translate
    /// of any point within `epsilon0` of a sample, after Lipschitz slack.
    pub delta0: f64,
    /// Half-width of the integer translate search window.
    pub window: i64,
    /// Minimum acceptable transform modulus during the search.
    pub threshold: f64,
    /// Per-sample translate table.
    pub table: Vec<KxEntry>,
}

/// Renders an exact rational point as e.g. `(0, 1/3)`.
pub fn format_rational_point(x: &[BigRational]) -> String {
    let parts: Vec<String> = x
        .iter()
        .map(|c| {
            if c.is_integer() {
                c.numer().to_string()
            } else {
                format!("{}/{}", c.numer(), c.denom())
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

/// Estimates the separation constants of `(R, B)` over exact sample points
/// `xs` spaced `h` apart.
///
/// For each sample the search maximizes `|mu_hat(x + k)|` over integer
/// translates `k` in `[-window, window]^d`; the zero sample is pinned to the
/// zero translate. `delta0` is the minimum squared modulus found minus the
/// Lipschitz slack `2 * (2 pi r_T) * (h/2) * sqrt(d)` accumulated over one
/// covering radius, clamped at zero; `epsilon0 = h/2`. Errors:
/// [`Error::ObstructionFound`] when some sample has no translate with
/// modulus at least `threshold` — such a point certifies that no plan over
/// this window can separate it.
pub fn estimate_lemma_constants(
    r: &IntMatrix,
    b: &[IntVector],
    xs: &[Vec<BigRational>],
    window: i64,
    h: f64,
    threshold: f64,
    mu_tol: f64,
) -> Result<LemmaConstants> {
    if xs.is_empty() {
        return Err(Error::Unsupported("at least one sample point is required".into()));
    }
    let d = r.dim();
    let evaluator = FourierEvaluator::new(r, b)?;
    let offsets = integer_window(d, window);
    let mut table = Vec::with_capacity(xs.len());
    for x in xs {
        let x_f: Vec<f64> = x
            .iter()
            .map(|c| c.to_f64().expect("sample coordinate fits in f64"))
            .collect();
        let (k, value) = if x.iter().all(|c| c.is_zero()) {
            (vec![0i64; d], evaluator.mu_hat(&x_f, mu_tol).norm())
        } else {
            let mut best: Option<(&[i64], f64)> = None;
            for off in &offsets {
                let pt: Vec<f64> = x_f
                    .iter()
                    .zip(off)
                    .map(|(c, o)| c + *o as f64)
                    .collect();
                let v = evaluator.mu_hat(&pt, mu_tol).norm();
                if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                    best = Some((off, v));
                }
            }
            let (off, v) = best.expect("window is nonempty");
            (off.to_vec(), v)
        };
        if value < threshold {
            return Err(Error::ObstructionFound {
                point: format_rational_point(x),
                best: value,
                threshold,
            });
        }
        table.push(KxEntry { x: x.clone(), k, value_sq: value * value });
    }
    let radius = attractor_radius_bound(r, b)?;
    let slack = 2.0 * std::f64::consts::TAU * radius * (h / 2.0) * (d as f64).sqrt();
    let min_sq = table.iter().map(|e| e.value_sq).fold(f64::INFINITY, f64::min);
    Ok(LemmaConstants {
        epsilon0: h / 2.0,
        delta0: (min_sq - slack).max(0.0),
        window,
        threshold,
        table,
    })
}

/// Rechooses the corrections of stage `stage_idx` by translate search.
///
/// Requires the stage depth to tame every already-built frequency:
/// `sup_{p >= 0} ||(R^T)^{-(level+p)}|| * max ||lambda||` over the partial
/// set before this stage must stay below `constants.epsilon0`
/// ([`Error::StageTooShallow`] otherwise). Each digit `j` is corrected by
/// the translate maximizing `|mu_hat((R^T)^{-level} j + k)|`
/// ([`Error::ObstructionFound`] when no translate reaches
/// `constants.threshold`); the zero digit keeps the zero correction, and
/// residues modulo `(R^T)^{level} Z^d` are preserved exactly.
pub fn correct_stage(
    plan: &SpectrumPlan,
    stage_idx: usize,
    constants: &LemmaConstants,
    mu_tol: f64,
) -> Result<SpectrumPlan> {
    if stage_idx >= plan.stages.len() {
        return Err(Error::Unsupported(format!(
            "plan has {} stages, stage {stage_idx} requested",
            plan.stages.len()
        )));
    }
    let stage = &plan.stages[stage_idx];
    let level = stage.level;
    let lambda_prev = build_lambda(plan, stage_idx, DEFAULT_BUDGET_CAP)?;
    let env = InversePowerEnvelope::new(&plan.r)?;
    let tail = env.tail_sup_bound(level) * max_norm(&lambda_prev);
    if tail >= constants.epsilon0 {
        return Err(Error::StageTooShallow {
            stage: stage_idx,
            level,
            tail,
            required: constants.epsilon0,
        });
    }

    let d = plan.r.dim();
    let rt_n = plan.r.transpose().pow(level);
    let evaluator = FourierEvaluator::new(&plan.r, &plan.b)?;
    let offsets = integer_window(d, constants.window);
    let mut corrections = Vec::with_capacity(stage.j_set.len());
    for j in &stage.j_set {
        if j.is_zero() {
            corrections.push(IntVector::zero(d));
            continue;
        }
        let x = rt_n
            .solve_rational(&j.to_rational())
            .expect("power of an expanding matrix is invertible");
        let x_f: Vec<f64> = x
            .iter()
            .map(|c| c.to_f64().expect("translate base fits in f64"))
            .collect();
        let mut best: Option<(&[i64], f64)> = None;
        for off in &offsets {
            let pt: Vec<f64> = x_f.iter().zip(off).map(|(c, o)| c + *o as f64).collect();
            let v = evaluator.mu_hat(&pt, mu_tol).norm();
            if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                best = Some((off, v));
            }
        }
        let (off, v) = best.expect("window is nonempty");
        if v < constants.threshold {
            return Err(Error::ObstructionFound {
                point: format_rational_point(&x),
                best: v,
                threshold: constants.threshold,
            });
        }
        corrections.push(IntVector::from_i64(off));
    }

    let hnf = Hnf::of_matrix(&rt_n);
    for (j, k) in stage.j_set.iter().zip(&corrections) {
        let corrected = j.add(&rt_n.apply(k));
        assert_eq!(
            hnf.reduce(&corrected),
            hnf.reduce(j),
            "corrections preserve residues by construction"
        );
    }

    let mut stages = plan.stages.clone();
    stages[stage_idx] = Stage { level, j_set: stage.j_set.clone(), corrections };
    let mut corrected = SpectrumPlan::new(plan.r.clone(), plan.b.clone(), stages)?;
    corrected.constants = Some((constants.epsilon0, constants.delta0));
    Ok(corrected)
}

/// Stage-by-stage separation profile of a plan.
#[derive(Debug, Clone)]
pub struct DeltaReport {
    /// For each `k = 1..=K`: the minimum of `|mu_hat((R^T)^{-m_k} lambda)|^2`
    /// over the stage-`k` partial set.
    pub stage_minima: Vec<f64>,
    /// Running infimum of the stage minima.
    pub delta: f64,
    /// `(epsilon0, delta0)` recorded on the plan by stage correction, if any.
    pub constants: Option<(f64, f64)>,
}

/// Evaluates the separation profile of the first `k_max` stages.
///
/// Evaluation points are exact rationals `(R^T)^{-m_k} lambda`; when the
/// digit set factors through independent axes, exact zero membership is
/// decided first and certified zeros are recorded as exactly `0.0` rather
/// than as a small float.
pub fn delta_lambda(
    plan: &SpectrumPlan,
    k_max: usize,
    mu_tol: f64,
    cap: u128,
) -> Result<DeltaReport> {
    let evaluator = FourierEvaluator::new(&plan.r, &plan.b)?;
    let exact_zero_test = product_form(&plan.b).is_some();
    let rt = plan.r.transpose();
    let mut stage_minima = Vec::with_capacity(k_max);
    let mut delta = f64::INFINITY;
    for k in 1..=k_max {
        let lambda = build_lambda(plan, k, cap)?;
        let rt_m = rt.pow(plan.depth(k));
        let mut stage_min = f64::INFINITY;
        for lam in &lambda {
            let x = rt_m
                .solve_rational(&lam.to_rational())
                .expect("power of an expanding matrix is invertible");
            let value_sq = if exact_zero_test && certified_zero(&plan.r, &plan.b, &x)? {
                0.0
            } else {
                let x_f: Vec<f64> = x
                    .iter()
                    .map(|c| c.to_f64().expect("evaluation point fits in f64"))
                    .collect();
                evaluator.mu_hat(&x_f, mu_tol).norm_sqr()
            };
            stage_min = stage_min.min(value_sq);
        }
        delta = delta.min(stage_min);
        stage_minima.push(stage_min);
    }
    Ok(DeltaReport { stage_minima, delta, constants: plan.constants })
}

/// Distinct unordered pairwise differences of a set, each with the indices
/// of one representative pair `(i, j)` such that the difference is
/// `set[j] - set[i]` up to sign. Differences are canonicalized to the
/// lexicographically larger of `v` and `-v`, and the result is sorted.
pub fn pairwise_differences(set: &[IntVector]) -> Vec<(IntVector, usize, usize)> {
    let mut seen: HashMap<IntVector, (usize, usize)> = HashMap::new();
    let as_i64: Option<Vec<Vec<i64>>> = set.iter().map(|v| v.to_i64()).collect();
    match as_i64 {
        Some(coords) => {
            // Fast path: machine integers, one vector allocation per pair.
            for j in 1..coords.len() {
                for i in 0..j {
                    let mut diff: Vec<i64> = coords[j]
                        .iter()
                        .zip(&coords[i])
                        .map(|(a, b)| a - b)
                        .collect();
                    let neg: Vec<i64> = diff.iter().map(|x| -x).collect();
                    if neg > diff {
                        diff = neg;
                    }
                    seen.entry(IntVector::from_i64(&diff)).or_insert((i, j));
                }
            }
        }
        None => {
            for j in 1..set.len() {
                for i in 0..j {
                    let diff = set[j].sub(&set[i]);
                    let neg = diff.neg();
                    let canon = if neg > diff { neg } else { diff };
                    seen.entry(canon).or_insert((i, j));
                }
            }
        }
    }
    let mut out: Vec<(IntVector, usize, usize)> =
        seen.into_iter().map(|(v, (i, j))| (v, i, j)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Result of the quadratic packing check.
#[derive(Debug, Clone)]
pub struct JpReport {
    /// `sum_lambda |mu_hat(xi + lambda)|^2` per grid point, aligned with the
    /// input grid.
    pub q_values: Vec<f64>,
    /// Size of the frequency set checked.
    pub lambda_len: usize,
    /// Largest transform modulus seen across distinct pairwise differences.
    pub max_offdiag: f64,
}

/// Verifies mutual orthogonality of `lambda` and evaluates the packing sums
/// `Q(xi) = sum_lambda |mu_hat(xi + lambda)|^2` on the given grid.
///
/// Orthogonality is checked on deduplicated pairwise differences with
/// per-evaluation tolerance `tol` and acceptance threshold `2 * tol`;
/// [`Error::NotOrthogonal`] names a violating pair. For an orthogonal set
/// the packing sums are bounded by `1 + |lambda| * 2 * tol`.
pub fn jp_check(
    r: &IntMatrix,
    b: &[IntVector],
    lambda: &[IntVector],
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<JpReport> {
    let evaluator = FourierEvaluator::new(r, b)?;
    let mut max_offdiag = 0.0f64;
    for (diff, i, j) in pairwise_differences(lambda) {
        let value = evaluator.mu_hat(&diff.to_f64(), tol).norm();
        max_offdiag = max_offdiag.max(value);
        if value > 2.0 * tol {
            return Err(Error::NotOrthogonal {
                first: small_coords(&lambda[i]),
                second: small_coords(&lambda[j]),
                value,
                tol: 2.0 * tol,
            });
        }
    }
    let lambda_f: Vec<Vec<f64>> = lambda.iter().map(|v| v.to_f64()).collect();
    let q_values: Vec<f64> = grid
        .iter()
        .map(|xi| {
            lambda_f
                .iter()
                .map(|lam| {
                    let pt: Vec<f64> = xi.iter().zip(lam).map(|(a, b)| a + b).collect();
                    evaluator.mu_hat(&pt, tol).norm_sqr()
                })
                .sum()
        })
        .collect();
    Ok(JpReport { q_values, lambda_len: lambda.len(), max_offdiag })
}
