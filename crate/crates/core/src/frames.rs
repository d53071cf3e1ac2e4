//! Frame-bound certification for exponential systems over digit cylinders:
//! dense Gram spectra, a factorized tower certificate that never forms the
//! Gram matrix, subset searches over residue pools, and step-function
//! round-trips through the measure.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::HashMap;

use crate::digits::expand_digits;
use crate::error::{Error, Result};
use crate::fourier::FourierEvaluator;
use crate::hadamard::HadamardTriple;
use crate::lattice::{Hnf, IntMatrix, IntVector};
use crate::linalg::{centered_unit_fraction, hermitian_eigenvalues, hermitian_eigenvalues_small, JACOBI_MAX};

/// Certified two-sided frame bounds for one exponential system.
#[derive(Debug, Clone)]
pub struct FrameReport {
    /// How the bounds were obtained: "dense", "tower", "exhaustive", "greedy".
    pub method: String,
    /// Cylinder depth `n`.
    pub level: u32,
    /// Frequency rows of the system, sorted; empty for tower certificates,
    /// whose implicit row set is the depth-`n` dual digit expansion.
    pub j_set: Vec<IntVector>,
    /// Least squared singular value of the normalized synthesis matrix.
    pub sigma2_min: f64,
    /// Greatest squared singular value.
    pub sigma2_max: f64,
    /// `max(1 - sigma2_min, sigma2_max - 1)`: distance from a Parseval system.
    pub epsilon: f64,
}

impl FrameReport {
    fn new(method: &str, level: u32, j_set: Vec<IntVector>, lo: f64, hi: f64) -> FrameReport {
        FrameReport {
            method: method.to_string(),
            level,
            j_set,
            sigma2_min: lo,
            sigma2_max: hi,
            epsilon: (1.0 - lo).max(hi - 1.0),
        }
    }
}

/// Sorts a frequency pool and rejects rows that collide modulo
/// `(R^T)^n Z^d`, which would duplicate matrix rows.
fn sorted_distinct_rows(r: &IntMatrix, n: u32, j: &[IntVector]) -> Result<Vec<IntVector>> {
    let hnf = Hnf::of_matrix(&r.transpose().pow(n));
    let mut seen: HashMap<IntVector, &IntVector> = HashMap::new();
    for row in j {
        if let Some(prev) = seen.insert(hnf.reduce(row), row) {
            return Err(Error::CollisionDetected {
                first: prev.to_i64().expect("row fits in i64"),
                second: row.to_i64().expect("row fits in i64"),
            });
        }
    }
    let mut sorted = j.to_vec();
    sorted.sort();
    Ok(sorted)
}

/// One row of the normalized synthesis matrix: column `b` holds
/// `N^{-n/2} exp(-2 pi i <R^{-n} b, lambda>)`, with the phase reduced as an
/// exact rational before exponentiation.
fn frame_row(
    adj_n: &IntMatrix,
    det_n: &BigInt,
    b_n: &[IntVector],
    lambda: &IntVector,
    scale: f64,
) -> Vec<Complex<f64>> {
    b_n.iter()
        .map(|b| {
            let num: BigInt = adj_n.apply(b).dot(lambda);
            let frac = centered_unit_fraction(&num, det_n);
            Complex::from_polar(scale, -std::f64::consts::TAU * frac)
        })
        .collect()
}

fn synthesis_rows(
    r: &IntMatrix,
    b_n: &[IntVector],
    n: u32,
    j: &[IntVector],
) -> Vec<Vec<Complex<f64>>> {
    let rn = r.pow(n);
    let adj_n = rn.adjugate();
    let det_n = rn.det().clone();
    let scale = 1.0 / (b_n.len() as f64).sqrt();
    j.iter()
        .map(|lambda| frame_row(&adj_n, &det_n, b_n, lambda, scale))
        .collect()
}

/// Two-sided frame bounds of the exponential system with rows `j` over the
/// depth-`n` cylinders of `(R, B)`, by a dense Hermitian eigensolve of the
/// `N^n x N^n` Gram matrix.
///
/// Fewer rows than columns cannot span, so `sigma2_min` is reported as an
/// exact zero in that case. Errors: [`Error::CollisionDetected`] for rows
/// that coincide modulo `(R^T)^n Z^d`, [`Error::BudgetExceeded`] when `N^n`
/// exceeds `cap`.
pub fn frame_bounds(
    r: &IntMatrix,
    b: &[IntVector],
    n: u32,
    j: &[IntVector],
    cap: u128,
) -> Result<FrameReport> {
    let rows = sorted_distinct_rows(r, n, j)?;
    let b_n = expand_digits(r, b, n, cap)?;
    let m = b_n.elements.len();
    let f_rows = synthesis_rows(r, &b_n.elements, n, &rows);

    let mut gram = DMatrix::<Complex<f64>>::zeros(m, m);
    for row in &f_rows {
        for i in 0..m {
            let ci = row[i].conj();
            for k in 0..m {
                gram[(i, k)] += ci * row[k];
            }
        }
    }
    let eigs = hermitian_eigenvalues(&gram);
    let lo = if rows.len() < m {
        // Rank deficit: fewer rows than columns forces a zero singular value.
        0.0
    } else {
        eigs[0].max(0.0)
    };
    let hi = eigs[m - 1];
    Ok(FrameReport::new("dense", n, rows, lo, hi))
}

/// Tower certificate: Frobenius distance of the Gram matrix from the
/// identity, accumulated without ever forming the matrix.
#[derive(Debug, Clone)]
pub struct TowerCertificate {
    /// Frame report with the certified enclosure
    /// `[1 - frobenius, 1 + frobenius]`.
    pub report: FrameReport,
    /// Certified value of `||F^H F - I||_F`.
    pub frobenius: f64,
    /// Number of rows and columns, `N^n`.
    pub size: u128,
}

struct TowerScratch {
    /// Difference digits of `B`, with pair multiplicities.
    diffs: Vec<(Vec<i64>, u64)>,
    /// Frequency digits as machine integers.
    ell: Vec<Vec<i64>>,
    /// Per-depth adjugates of `R^s` and determinants, `s = 1..=n`.
    adj: Vec<Vec<Vec<i64>>>,
    det: Vec<i128>,
    /// Per-depth powers `R^{s}` for updating prefixes.
    rpow: Vec<Vec<Vec<i64>>>,
}

/// Walks all nonzero difference strings depth-first, multiplying mask
/// factors as digits are appended, and accumulates
/// `multiplicity * |product|^2` at the leaves.
fn tower_dfs(
    scratch: &TowerScratch,
    depth: usize,
    n: usize,
    prefix: &mut Vec<i64>,
    product: Complex<f64>,
    multiplicity: u64,
    zero_so_far: bool,
    acc: &mut f64,
) {
    if depth == n {
        if !zero_so_far {
            *acc += multiplicity as f64 * product.norm_sqr();
        }
        return;
    }
    let d = prefix.len();
    let inv_n = 1.0 / scratch.ell.len() as f64;
    for (eps, count) in &scratch.diffs {
        // prefix' = prefix + R^depth eps
        let saved = prefix.clone();
        for i in 0..d {
            let mut acc_i = 0i64;
            for (k, e) in eps.iter().enumerate() {
                acc_i += scratch.rpow[depth][i][k] * e;
            }
            prefix[i] += acc_i;
        }
        // Mask factor at scale depth+1: mean of exp(-2 pi i <R^{-s} prefix, l>).
        let s = depth; // index into adj/det, which start at s = 1
        let det_s = scratch.det[s];
        let mut factor = Complex::new(0.0, 0.0);
        for l in &scratch.ell {
            let mut dot: i128 = 0;
            for i in 0..d {
                let mut row: i128 = 0;
                for (k, p) in prefix.iter().enumerate() {
                    row += scratch.adj[s][i][k] as i128 * *p as i128;
                }
                dot += row * l[i] as i128;
            }
            let mut rem = dot.rem_euclid(det_s);
            if 2 * rem > det_s {
                rem -= det_s;
            }
            let frac = rem as f64 / det_s as f64;
            factor += Complex::from_polar(1.0, -std::f64::consts::TAU * frac);
        }
        factor *= inv_n;
        let is_zero_digit = eps.iter().all(|&x| x == 0);
        tower_dfs(
            scratch,
            depth + 1,
            n,
            prefix,
            product * factor,
            multiplicity * count,
            zero_so_far && is_zero_digit,
            acc,
        );
        *prefix = saved;
    }
}

fn to_i64_matrix(m: &IntMatrix) -> Vec<Vec<i64>> {
    m.to_i64().expect("matrix entries fit in i64 at certification scale")
}

/// Certifies the frame bounds of the full tower system at depth `n`: rows
/// are the depth-`n` dual expansion of the verified triple's frequency set,
/// columns its digit expansion.
///
/// The Gram entry for a column difference factors into a product of `n`
/// frequency-mask values depending only on prefixes of the difference
/// string, so `||F^H F - I||_F^2` is a sum over nonzero difference strings
/// of `multiplicity * |product|^2`, walked depth-first in
/// `O(|B - B|^n)` time and constant memory. Diagonal entries are exactly 1,
/// and every eigenvalue of the Hermitian Gram matrix lies within the
/// Frobenius distance of 1, giving the enclosure without an `N^n`-sized
/// eigensolve. Errors: [`Error::BudgetExceeded`] when `N^n` exceeds `cap`.
pub fn tower_frame_bounds(triple: &HadamardTriple, n: u32, cap: u128) -> Result<TowerCertificate> {
    if n == 0 {
        return Err(Error::Unsupported("tower depth must be at least 1".into()));
    }
    let big_n = triple.b.len() as u128;
    let size = big_n
        .checked_pow(n)
        .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
    if size > cap {
        return Err(Error::BudgetExceeded { needed: size, cap });
    }

    let d = triple.r.dim();
    let mut diff_counts: HashMap<Vec<i64>, u64> = HashMap::new();
    for b1 in &triple.b {
        for b2 in &triple.b {
            let diff = b2.sub(b1).to_i64().expect("digit difference fits in i64");
            *diff_counts.entry(diff).or_insert(0) += 1;
        }
    }
    let mut diffs: Vec<(Vec<i64>, u64)> = diff_counts.into_iter().collect();
    diffs.sort();

    let mut adj = Vec::with_capacity(n as usize);
    let mut det = Vec::with_capacity(n as usize);
    let mut rpow = Vec::with_capacity(n as usize);
    for s in 0..n {
        rpow.push(to_i64_matrix(&triple.r.pow(s)));
        let rs = triple.r.pow(s + 1);
        adj.push(to_i64_matrix(&rs.adjugate()));
        det.push(rs.det().to_i128().expect("determinant fits in i128 at certification scale"));
    }
    let ell: Vec<Vec<i64>> = triple
        .l
        .iter()
        .map(|v| v.to_i64().expect("frequency digit fits in i64"))
        .collect();

    let scratch = TowerScratch { diffs, ell, adj, det, rpow };
    let mut acc = 0.0f64;
    let mut prefix = vec![0i64; d];
    tower_dfs(
        &scratch,
        0,
        n as usize,
        &mut prefix,
        Complex::new(1.0, 0.0),
        1,
        true,
        &mut acc,
    );
    let frobenius = acc.sqrt();
    let report = FrameReport::new(
        "tower",
        n,
        Vec::new(),
        1.0 - frobenius,
        1.0 + frobenius,
    );
    Ok(TowerCertificate { report, frobenius, size })
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c.checked_mul(n - k + i)?;
        c /= i;
    }
    Some(c)
}

struct SubsetSearchContext {
    m: usize,
    pool: Vec<IntVector>,
    /// Outer product of each pool row with itself, row-major `m x m`.
    outers: Vec<Vec<Complex<f64>>>,
}

impl SubsetSearchContext {
    fn new(r: &IntMatrix, b: &[IntVector], n: u32, pool: &[IntVector]) -> Result<SubsetSearchContext> {
        let pool = sorted_distinct_rows(r, n, pool)?;
        let b_n = expand_digits(r, b, n, 1 << 20)?;
        let m = b_n.elements.len();
        if m > JACOBI_MAX {
            return Err(Error::Unsupported(format!(
                "subset search needs at most {JACOBI_MAX} cylinders, got {m}"
            )));
        }
        let rows = synthesis_rows(r, &b_n.elements, n, &pool);
        let outers: Vec<Vec<Complex<f64>>> = rows
            .iter()
            .map(|row| {
                let mut o = vec![Complex::new(0.0, 0.0); m * m];
                for i in 0..m {
                    let ci = row[i].conj();
                    for k in 0..m {
                        o[i * m + k] = ci * row[k];
                    }
                }
                o
            })
            .collect();
        Ok(SubsetSearchContext { m, pool, outers })
    }

    /// Ascending eigenvalues of the Gram matrix of the given pool indices,
    /// rebuilt from scratch in index order so scores are bit-reproducible.
    fn spectrum(&self, indices: &[usize]) -> Vec<f64> {
        let mut gram = vec![Complex::new(0.0, 0.0); self.m * self.m];
        for &idx in indices {
            for (g, o) in gram.iter_mut().zip(&self.outers[idx]) {
                *g += o;
            }
        }
        hermitian_eigenvalues_small(self.m, &gram)
    }

    fn report(&self, method: &str, n: u32, indices: &[usize]) -> FrameReport {
        let spectrum = self.spectrum(indices);
        let j_set: Vec<IntVector> = indices.iter().map(|&i| self.pool[i].clone()).collect();
        FrameReport::new(method, n, j_set, spectrum[0].max(0.0), spectrum[self.m - 1])
    }
}

/// True when `candidate` scores strictly better than `best` under the search
/// order: larger least eigenvalue, then smaller greatest eigenvalue.
fn improves(candidate: (f64, f64), best: (f64, f64)) -> bool {
    candidate.0 > best.0 || (candidate.0 == best.0 && candidate.1 < best.1)
}

/// Exhaustive search for the size-`s` subset of `pool` maximizing the least
/// squared singular value over the depth-`n` cylinders, breaking ties by
/// smaller greatest singular value and then by lexicographically smallest
/// sorted row set.
///
/// Subsets are enumerated in lexicographic index order over the sorted pool
/// and scores compared exactly, so the result is deterministic and the tie
/// break is by construction. Errors: [`Error::BudgetExceeded`] when the
/// subset count exceeds `cap`, [`Error::Unsupported`] when `N^n` exceeds
/// the small eigensolver or `s` exceeds the pool.
pub fn exhaustive_subset_search(
    r: &IntMatrix,
    b: &[IntVector],
    n: u32,
    pool: &[IntVector],
    s: usize,
    cap: u128,
) -> Result<FrameReport> {
    let ctx = SubsetSearchContext::new(r, b, n, pool)?;
    let p = ctx.pool.len();
    if s == 0 || s > p {
        return Err(Error::Unsupported(format!(
            "subset size {s} is outside the pool of {p} rows"
        )));
    }
    let count = binomial(p as u128, s as u128)
        .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
    if count > cap {
        return Err(Error::BudgetExceeded { needed: count, cap });
    }

    let mut indices: Vec<usize> = (0..s).collect();
    let mut best_indices = indices.clone();
    let spectrum = ctx.spectrum(&indices);
    let mut best_score = (spectrum[0], spectrum[ctx.m - 1]);
    loop {
        // Advance to the next lexicographic combination.
        let mut i = s;
        loop {
            if i == 0 {
                let report = ctx.report("exhaustive", n, &best_indices);
                return Ok(report);
            }
            i -= 1;
            if indices[i] != i + p - s {
                break;
            }
        }
        indices[i] += 1;
        for k in i + 1..s {
            indices[k] = indices[k - 1] + 1;
        }

        let spectrum = ctx.spectrum(&indices);
        let score = (spectrum[0], spectrum[ctx.m - 1]);
        if improves(score, best_score) {
            best_score = score;
            best_indices = indices.clone();
        }
    }
}

/// Greedy search with restarts for a size-`s` subset with a large least
/// squared singular value.
///
/// The first restart starts from the first pool row; each further restart
/// starts from a seeded random row. Every step adds the row whose updated
/// Gram spectrum is lexicographically largest (compared from the smallest
/// eigenvalue up), breaking ties by pool order, so a fixed seed reproduces
/// the result bit-for-bit. The best restart under the exhaustive-search
/// order is reported.
pub fn greedy_subset_search(
    r: &IntMatrix,
    b: &[IntVector],
    n: u32,
    pool: &[IntVector],
    s: usize,
    seed: u64,
    restarts: u32,
) -> Result<FrameReport> {
    let ctx = SubsetSearchContext::new(r, b, n, pool)?;
    let p = ctx.pool.len();
    if s == 0 || s > p {
        return Err(Error::Unsupported(format!(
            "subset size {s} is outside the pool of {p} rows"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, (f64, f64))> = None;
    for restart in 0..restarts.max(1) {
        let start = if restart == 0 { 0 } else { rng.random_range(0..p) };
        let mut chosen = vec![start];
        while chosen.len() < s {
            let mut step_best: Option<(usize, Vec<f64>)> = None;
            for candidate in 0..p {
                if chosen.contains(&candidate) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial.push(candidate);
                let spectrum = ctx.spectrum(&trial);
                let better = match &step_best {
                    None => true,
                    Some((_, best_spec)) => spectrum.as_slice() > best_spec.as_slice(),
                };
                if better {
                    step_best = Some((candidate, spectrum));
                }
            }
            chosen.push(step_best.expect("pool has rows left").0);
        }
        chosen.sort_unstable();
        let spectrum = ctx.spectrum(&chosen);
        let score = (spectrum[0], spectrum[ctx.m - 1]);
        let replace = match &best {
            None => true,
            Some((prev_idx, prev_score)) => {
                improves(score, *prev_score)
                    || (score == *prev_score && chosen < *prev_idx)
            }
        };
        if replace {
            best = Some((chosen, score));
        }
    }
    let (indices, _) = best.expect("at least one restart runs");
    Ok(ctx.report("greedy", n, &indices))
}

/// Two-sided bound for a concatenation of stages with per-stage deviations
/// `eps_i`: the product system's squared singular values lie in
/// `[prod (1 - eps_i), prod (1 + eps_i)]`.
pub fn concatenation_bounds(eps: &[f64]) -> Result<(f64, f64)> {
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    for (i, &e) in eps.iter().enumerate() {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::Unsupported(format!(
                "stage {i} deviation {e} is outside [0, 1)"
            )));
        }
        lo *= 1.0 - e;
        hi *= 1.0 + e;
    }
    Ok((lo, hi))
}

/// Outcome of random step-function round trips through the measure.
#[derive(Debug, Clone)]
pub struct StepCheckReport {
    /// Cylinder depth of the step functions.
    pub level: u32,
    /// Number of random trials.
    pub trials: u32,
    /// Least ratio `sum |coef|^2 / ||f||^2` observed.
    pub min_ratio: f64,
    /// Greatest ratio observed.
    pub max_ratio: f64,
    /// Mean ratio.
    pub mean_ratio: f64,
}

struct StepEvaluator {
    m: usize,
    inv_nn: f64,
    /// Transform factor `mu_hat((R^T)^{-n} lambda)` per frequency.
    factors: Vec<Complex<f64>>,
    /// Phase rows `exp(-2 pi i <R^{-n} b, lambda>)` per frequency.
    phases: Vec<Vec<Complex<f64>>>,
}

impl StepEvaluator {
    fn new(
        r: &IntMatrix,
        b: &[IntVector],
        lambda: &[IntVector],
        n: u32,
        mu_tol: f64,
        cap: u128,
    ) -> Result<StepEvaluator> {
        let b_n = expand_digits(r, b, n, cap)?;
        let m = b_n.elements.len();
        let evaluator = FourierEvaluator::new(r, b)?;
        let rt_n = r.transpose().pow(n);
        let factors: Vec<Complex<f64>> = lambda
            .iter()
            .map(|lam| {
                let x = rt_n
                    .solve_rational(&lam.to_rational())
                    .expect("power of an expanding matrix is invertible");
                let x_f: Vec<f64> = x
                    .iter()
                    .map(|c| c.to_f64().expect("evaluation point fits in f64"))
                    .collect();
                evaluator.mu_hat(&x_f, mu_tol)
            })
            .collect();
        // Phase rows are unnormalized; the 1/N^n lands in the coefficient.
        let rn = r.pow(n);
        let adj_n = rn.adjugate();
        let det_n = rn.det().clone();
        let phases: Vec<Vec<Complex<f64>>> = lambda
            .iter()
            .map(|lam| frame_row(&adj_n, &det_n, &b_n.elements, lam, 1.0))
            .collect();
        Ok(StepEvaluator { m, inv_nn: 1.0 / m as f64, factors, phases })
    }

    /// Transform-side coefficients of the step function with cylinder
    /// weights `w`: `(1/N^n) mu_hat((R^T)^{-n} lambda) sum_b w_b phase_b`.
    fn coefficients(&self, w: &[Complex<f64>]) -> Vec<Complex<f64>> {
        self.factors
            .iter()
            .zip(&self.phases)
            .map(|(factor, row)| {
                let s: Complex<f64> = row.iter().zip(w).map(|(p, wb)| p * wb).sum();
                factor * s * self.inv_nn
            })
            .collect()
    }

    /// Squared measure norm of the step function: `(1/N^n) sum |w_b|^2`.
    fn norm_sqr(&self, w: &[Complex<f64>]) -> f64 {
        w.iter().map(|x| x.norm_sqr()).sum::<f64>() * self.inv_nn
    }
}

/// Ratio `sum_lambda |coef_lambda(f)|^2 / ||f||^2` for random level-`n` step
/// functions, using the exact cylinder quadrature for both sides.
///
/// The frequency set must come from a plan of total depth at least `n`
/// (pass that depth as `plan_depth`); deeper step functions are outside the
/// certified regime and rejected with [`Error::LevelTooDeep`].
pub fn step_frame_check(
    r: &IntMatrix,
    b: &[IntVector],
    lambda: &[IntVector],
    n: u32,
    plan_depth: u32,
    trials: u32,
    seed: u64,
    mu_tol: f64,
    cap: u128,
) -> Result<StepCheckReport> {
    if n > plan_depth {
        return Err(Error::LevelTooDeep { level: n, available: plan_depth });
    }
    if trials == 0 {
        return Err(Error::Unsupported("at least one trial is required".into()));
    }
    let eval = StepEvaluator::new(r, b, lambda, n, mu_tol, cap)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut sum_ratio = 0.0;
    for _ in 0..trials {
        let w: Vec<Complex<f64>> = (0..eval.m)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = eval.norm_sqr(&w);
        let coef_energy: f64 = eval.coefficients(&w).iter().map(|c| c.norm_sqr()).sum();
        let ratio = coef_energy / norm;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        sum_ratio += ratio;
    }
    Ok(StepCheckReport {
        level: n,
        trials,
        min_ratio,
        max_ratio,
        mean_ratio: sum_ratio / trials as f64,
    })
}

/// Recovers the Gram spectrum of the frame system through the measure-side
/// route: coefficients of the standard cylinder basis, transform factors
/// divided back out, rescaled by `N^{n/2}`.
///
/// Agreement with [`frame_bounds`] validates the quadrature identities the
/// step checks rely on. Errors: [`Error::Unsupported`] when some transform
/// factor is too small to divide out (below `1e-6`).
pub fn step_basis_gram_spectrum(
    r: &IntMatrix,
    b: &[IntVector],
    lambda: &[IntVector],
    n: u32,
    mu_tol: f64,
    cap: u128,
) -> Result<Vec<f64>> {
    let eval = StepEvaluator::new(r, b, lambda, n, mu_tol, cap)?;
    for (lam, factor) in lambda.iter().zip(&eval.factors) {
        if factor.norm() < 1e-6 {
            return Err(Error::Unsupported(format!(
                "transform factor at row {:?} has modulus {:.3e}, too small to divide out",
                lam.to_i64(),
                factor.norm()
            )));
        }
    }
    let m = eval.m;
    let scale = (m as f64).sqrt();
    let mut rows: Vec<Vec<Complex<f64>>> =
        vec![Vec::with_capacity(m); lambda.len()];
    let mut basis = vec![Complex::new(0.0, 0.0); m];
    for col in 0..m {
        basis[col] = Complex::new(1.0, 0.0);
        let coefs = eval.coefficients(&basis);
        for ((row, coef), factor) in rows.iter_mut().zip(&coefs).zip(&eval.factors) {
            row.push(coef / factor * scale);
        }
        basis[col] = Complex::new(0.0, 0.0);
    }
    let mut gram = DMatrix::<Complex<f64>>::zeros(m, m);
    for row in &rows {
        for i in 0..m {
            let ci = row[i].conj();
            for k in 0..m {
                gram[(i, k)] += ci * row[k];
            }
        }
    }
    Ok(hermitian_eigenvalues(&gram))
}
