//! Digit-word expansions, attractor sampling, radius bounds, and numeric
//! no-overlap evidence for the iterated function system of a pair (R, B).

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{is_expansive, IntMatrix, IntVector};

/// Default cap on the number of enumerated elements N^n.
pub const DEFAULT_BUDGET_CAP: u128 = 1 << 20;

/// Default proximity used by [`overlap_evidence`].
pub const DEFAULT_OVERLAP_ETA: f64 = 1e-6;

/// The level-n expansion B + R B + ... + R^{n-1} B, sorted and distinct.
#[derive(Clone, Debug)]
pub struct DigitExpansion {
    pub level: u32,
    pub elements: Vec<IntVector>,
}

/// One exact attractor sample point together with the digit word
/// (indices into B, outermost digit first) that generates it.
#[derive(Clone, Debug)]
pub struct AttractorPoint {
    pub point: Vec<BigRational>,
    pub word: Vec<usize>,
}

/// Depth-n cylinder sample of the attractor: x = sum_{j=1..depth} R^{-j} b_j
/// over all digit words, kept exact.
#[derive(Clone, Debug)]
pub struct AttractorSample {
    pub depth: u32,
    pub points: Vec<AttractorPoint>,
}

impl AttractorSample {
    /// Float view of the points, in the same order.
    pub fn points_f64(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| rational_vec_to_f64(&p.point)).collect()
    }
}

/// Lossy float view of a rational vector.
pub fn rational_vec_to_f64(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().expect("rational out of f64 range")).collect()
}

fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_budget(n_digits: usize, level: u32, cap: u128) -> Result<()> {
    let needed = (n_digits as u128)
        .checked_pow(level)
        .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
    if needed > cap {
        return Err(Error::BudgetExceeded { needed, cap });
    }
    Ok(())
}

/// Exact expansion B_n = B + R B + ... + R^{n-1} B.
///
/// All N^n digit words must map to distinct vectors (guaranteed when B is a
/// simple digit set); a coincidence is reported as a collision error.
pub fn expand_digits(
    r: &IntMatrix,
    b: &[IntVector],
    n: u32,
    cap: u128,
) -> Result<DigitExpansion> {
    assert!(n >= 1, "expansion level must be at least 1");
    assert!(!b.is_empty(), "digit set must be non-empty");
    check_budget(b.len(), n, cap)?;

    let mut elements: Vec<IntVector> = vec![IntVector::zero(r.dim())];
    let mut power = IntMatrix::identity(r.dim());
    for _ in 0..n {
        let shifted: Vec<IntVector> = b.iter().map(|digit| power.apply(digit)).collect();
        let mut next = Vec::with_capacity(elements.len() * b.len());
        for word in &elements {
            for s in &shifted {
                next.push(word.add(s));
            }
        }
        elements = next;
        power = r.mul(&power);
    }
    elements.sort();
    for pair in elements.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::CollisionDetected {
                first: pair[0].to_i64().unwrap_or_default(),
                second: pair[1].to_i64().unwrap_or_default(),
            });
        }
    }
    Ok(DigitExpansion { level: n, elements })
}

/// Exact expansion L + R^T L + ... + (R^T)^{n-1} L.
pub fn dual_expand(
    r: &IntMatrix,
    l: &[IntVector],
    n: u32,
    cap: u128,
) -> Result<DigitExpansion> {
    expand_digits(&r.transpose(), l, n, cap)
}

/// Exact depth-n cylinder sample: all points sum_{j=1..depth} R^{-j} b_j,
/// sorted by point, each carrying its digit word.
pub fn sample_attractor(
    r: &IntMatrix,
    b: &[IntVector],
    depth: u32,
    cap: u128,
) -> Result<AttractorSample> {
    assert!(depth >= 1, "sampling depth must be at least 1");
    assert!(!b.is_empty(), "digit set must be non-empty");
    check_budget(b.len(), depth, cap)?;
    let d = r.dim();

    // x = R^{-depth} * (R^{depth-1} b_1 + ... + R^0 b_depth), evaluated with
    // the exact adjugate so every coordinate stays rational.
    let rn = r.pow(depth);
    let det = rn.det();
    assert!(!det.is_zero(), "dilation must be invertible");
    let adj = rn.adjugate();

    let mut words: Vec<(IntVector, Vec<usize>)> = vec![(IntVector::zero(d), Vec::new())];
    let mut power = IntMatrix::identity(d);
    for _ in 0..depth {
        let shifted: Vec<IntVector> = b.iter().map(|digit| power.apply(digit)).collect();
        let mut next = Vec::with_capacity(words.len() * b.len());
        for (vec, word) in &words {
            for (idx, s) in shifted.iter().enumerate() {
                let mut w = word.clone();
                w.push(idx);
                next.push((vec.add(s), w));
            }
        }
        words = next;
        power = r.mul(&power);
    }

    let det_rat = BigRational::from_integer(det);
    let mut points: Vec<AttractorPoint> = words
        .into_iter()
        .map(|(vec, mut word)| {
            // The accumulation pairs word[j] with R^j, so the last index is
            // the outermost digit; reverse to make word[0] the R^{-1} digit.
            word.reverse();
            let scaled = adj.apply(&vec);
            let point = scaled
                .coords
                .into_iter()
                .map(|c| BigRational::from_integer(c) / &det_rat)
                .collect();
            AttractorPoint { point, word }
        })
        .collect();
    points.sort_by(|a, b| a.point.cmp(&b.point));
    Ok(AttractorSample { depth, points })
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values[0]
}

/// Certified upper bounds on the operator norms ||R^{-j}||_2 of all inverse
/// powers of an expansive integer matrix.
///
/// Norms are computed in floating point from the exact adjugate and inflated
/// by 1e-9 relative to absorb rounding, so every bound stays a true upper
/// bound. Because ||(R^T)^{-j}||_2 = ||R^{-j}||_2, the same envelope serves R
/// and its transpose.
#[derive(Clone, Debug)]
pub struct InversePowerEnvelope {
    /// Inflated norm bounds c_0 = 1, c_1, ..., c_q where q is the first
    /// index with c_q < 3/4.
    norms: Vec<f64>,
    q: usize,
    /// Upper bound on sup_{j >= 0} ||R^{-j}||.
    pub sup_bound: f64,
    /// Upper bound on sum_{j >= 1} ||R^{-j}||, tight to about 1e-15.
    pub sum_bound: f64,
}

impl InversePowerEnvelope {
    pub fn new(r: &IntMatrix) -> Result<Self> {
        if !is_expansive(r)? {
            return Err(Error::NonExpansive);
        }
        let d = r.dim();
        let det = r.det().to_f64().expect("determinant out of f64 range");
        let rinv = r.adjugate().to_f64() / det;

        const INFLATE: f64 = 1.0 + 1e-9;
        let mut norms = vec![1.0f64];
        let mut power = DMatrix::<f64>::identity(d, d);
        let mut q = None;
        for j in 1..=64usize {
            power = &rinv * &power;
            let c = operator_norm(&power) * INFLATE;
            norms.push(c);
            if c < 0.75 {
                q = Some(j);
                break;
            }
        }
        let q = q.ok_or_else(|| {
            Error::Unsupported("inverse power norms do not contract within 64 steps".into())
        })?;
        // With j = m*q + s: ||R^{-j}|| <= c_q^m c_s, so both the supremum and
        // the full sum have closed geometric bounds.
        let p: f64 = norms[..q].iter().sum();
        let g = p / (1.0 - norms[q]);
        let sup_bound = norms[..q].iter().cloned().fold(0.0f64, f64::max);

        let mut total: f64 = norms[1..].iter().sum();
        let mut c_j = norms[q];
        while c_j * (g - 1.0) >= 1e-15 && norms.len() < 600 {
            power = &rinv * &power;
            c_j = operator_norm(&power) * INFLATE;
            norms.push(c_j);
            total += c_j;
        }
        // Remaining tail: ||R^{-(J+k)}|| <= c_J ||R^{-k}||, summed over k >= 1.
        total += c_j * (g - 1.0);

        Ok(InversePowerEnvelope { norms, q, sup_bound, sum_bound: total })
    }

    /// Upper bound on ||R^{-j}||_2 via c_q^m * c_s for j = m q + s.
    pub fn norm_bound(&self, j: u32) -> f64 {
        let j = j as usize;
        if j < self.norms.len() {
            return self.norms[j];
        }
        let m = (j / self.q) as i32;
        let s = j % self.q;
        self.norms[self.q].powi(m) * self.norms[s]
    }

    /// Upper bound on sup_{j >= n} ||R^{-j}||_2: the bound decays every q
    /// steps, so the window [n, n+q) dominates all later indices.
    pub fn tail_sup_bound(&self, n: u32) -> f64 {
        (n..n + self.q as u32).map(|j| self.norm_bound(j)).fold(0.0f64, f64::max)
    }
}

/// Upper bound r_T = sum_{j>=1} ||R^{-j}||_op * max_b ||b|| on the norm of
/// every attractor point.
pub fn attractor_radius_bound(r: &IntMatrix, b: &[IntVector]) -> Result<f64> {
    let max_b = b
        .iter()
        .map(|v| euclidean_norm(&v.to_f64()))
        .fold(0.0f64, f64::max);
    if max_b == 0.0 {
        // The envelope still validates expansiveness for the degenerate set.
        if !is_expansive(r)? {
            return Err(Error::NonExpansive);
        }
        return Ok(0.0);
    }
    Ok(max_b * InversePowerEnvelope::new(r)?.sum_bound)
}

/// Diagnostic proximity report for the no-overlap condition.
#[derive(Clone, Debug)]
pub struct OverlapReport {
    pub depth: u32,
    pub eta: f64,
    /// (digit index i, digit index j, fraction of cylinder-i sample points
    /// within eta of some cylinder-j sample point), for each pair i < j.
    pub pair_fractions: Vec<(usize, usize, f64)>,
    pub max_fraction: f64,
}

/// Counts depth-level sample points of each image cylinder R^{-1}(b + T) that
/// lie within `eta` of another cylinder's points. For a simple digit set the
/// overlap has measure zero, so the fractions are evidence, not proof.
pub fn overlap_evidence(
    r: &IntMatrix,
    b: &[IntVector],
    depth: u32,
    eta: f64,
    cap: u128,
) -> Result<OverlapReport> {
    let sample = sample_attractor(r, b, depth, cap)?;
    let base: Vec<Vec<f64>> = sample.points_f64();

    let det = r.det().to_f64().expect("determinant out of f64 range");
    let rinv = r.adjugate().to_f64() / det;
    let d = r.dim();

    // Image of the sample under tau_b(x) = R^{-1}(b + x), per digit.
    let cylinders: Vec<Vec<Vec<f64>>> = b
        .iter()
        .map(|digit| {
            let shift = digit.to_f64();
            base.iter()
                .map(|x| {
                    let v = nalgebra::DVector::from_iterator(
                        d,
                        x.iter().zip(&shift).map(|(xi, si)| xi + si),
                    );
                    let y = &rinv * v;
                    y.iter().copied().collect::<Vec<f64>>()
                })
                .collect()
        })
        .collect();

    let mut pair_fractions = Vec::new();
    let mut max_fraction = 0.0f64;
    for i in 0..b.len() {
        for j in i + 1..b.len() {
            let mut close = 0usize;
            for x in &cylinders[i] {
                let near = cylinders[j].iter().any(|y| {
                    let dist2: f64 =
                        x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum();
                    dist2 <= eta * eta
                });
                if near {
                    close += 1;
                }
            }
            let fraction = close as f64 / base.len() as f64;
            max_fraction = max_fraction.max(fraction);
            pair_fractions.push((i, j, fraction));
        }
    }
    Ok(OverlapReport { depth, eta, pair_fractions, max_fraction })
}
