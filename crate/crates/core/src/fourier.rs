//! The digit-set mask M_B, the measure transform as a truncated product with
//! a certified tail bound, exact rational zero-set membership for product-form
//! masks, the periodic-zero obstruction scan, and the 1D forward iteration
//! used to rule out integer obstructions.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::digits::InversePowerEnvelope;
use crate::error::{Error, Result};
use crate::lattice::{IntMatrix, IntVector};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Mask value M_B(xi) = (1/N) sum_b e^{-2 pi i <b, xi>}.
pub fn mask_eval(b: &[IntVector], xi: &[f64]) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for digit in b {
        let phase: f64 = digit
            .coords
            .iter()
            .zip(xi)
            .map(|(c, x)| c.to_f64().expect("digit out of f64 range") * x)
            .sum();
        acc += Complex::from_polar(1.0, -TWO_PI * phase);
    }
    acc / b.len() as f64
}

/// Mask value at an exact rational point (still a float result; only the
/// phase reduction x mod 1 is done exactly, which keeps huge rationals
/// accurate).
pub fn mask_eval_rational(b: &[IntVector], xi: &[BigRational]) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for digit in b {
        let mut phase = BigRational::zero();
        for (c, x) in digit.coords.iter().zip(xi) {
            phase += BigRational::from_integer(c.clone()) * x;
        }
        let frac = &phase - phase.floor();
        acc += Complex::from_polar(1.0, -TWO_PI * frac.to_f64().expect("fraction fits"));
    }
    acc / b.len() as f64
}

/// Evaluator for the transform of the invariant measure of (R, B), as the
/// product over j >= 1 of M_B((R^T)^{-j} xi), truncated once the certified
/// tail bound 2 pi ||(R^T)^{-n} xi|| r_T falls below the requested tolerance.
#[derive(Clone, Debug)]
pub struct FourierEvaluator {
    d: usize,
    digits: Vec<IntVector>,
    rinv_t: nalgebra::DMatrix<f64>,
    /// Attractor radius bound r_T used in the tail estimate.
    pub radius: f64,
}

impl FourierEvaluator {
    pub fn new(r: &IntMatrix, b: &[IntVector]) -> Result<Self> {
        let radius = crate::digits::attractor_radius_bound(r, b)?;
        let det = r.det().to_f64().expect("determinant out of f64 range");
        let rinv_t = (r.adjugate().to_f64() / det).transpose();
        Ok(FourierEvaluator { d: r.dim(), digits: b.to_vec(), rinv_t, radius })
    }

    /// Truncation depth n with 2 pi ||(R^T)^{-n} xi|| r_T <= tol.
    pub fn truncation_depth(&self, xi: &[f64], tol: f64) -> u32 {
        assert!(tol > 0.0, "tolerance must be positive");
        let mut eta = nalgebra::DVector::from_column_slice(xi);
        let mut n = 0u32;
        while TWO_PI * eta.norm() * self.radius > tol {
            eta = &self.rinv_t * eta;
            n += 1;
            assert!(n < 100_000, "truncation depth runaway");
        }
        n
    }

    /// Transform value with |error| <= tol.
    pub fn mu_hat(&self, xi: &[f64], tol: f64) -> Complex<f64> {
        assert_eq!(xi.len(), self.d);
        assert!(tol > 0.0, "tolerance must be positive");
        let mut eta = nalgebra::DVector::from_column_slice(xi);
        let mut acc = Complex::new(1.0, 0.0);
        let mut n = 0u32;
        while TWO_PI * eta.norm() * self.radius > tol {
            eta = &self.rinv_t * eta;
            let point: Vec<f64> = eta.iter().copied().collect();
            acc *= mask_eval(&self.digits, &point);
            n += 1;
            if acc.norm_sqr() == 0.0 {
                break;
            }
            assert!(n < 100_000, "truncation depth runaway");
        }
        acc
    }
}

/// One-shot transform evaluation; builds a fresh evaluator.
pub fn mu_hat(r: &IntMatrix, b: &[IntVector], xi: &[f64], tol: f64) -> Result<Complex<f64>> {
    Ok(FourierEvaluator::new(r, b)?.mu_hat(xi, tol))
}

/// Recognized product structure of a digit set: after subtracting the
/// lexicographically smallest digit, B = prod_i {0, d_i} coordinatewise
/// (d_i = 0 marks a coordinate on which the digits are constant).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductMask {
    pub translation: IntVector,
    /// Per-axis difference d_i; the mask vanishes exactly on the hyperplanes
    /// xi_i in (1/(2 d_i)) (2Z + 1) over axes with d_i != 0.
    pub diffs: Vec<BigInt>,
}

impl ProductMask {
    /// Whether the exact rational point lies on a zero hyperplane of M_B.
    pub fn on_zero_hyperplane(&self, xi: &[BigRational]) -> bool {
        self.diffs.iter().zip(xi).any(|(d, x)| {
            if d.is_zero() {
                return false;
            }
            let t = x * BigRational::from_integer(2 * d);
            t.is_integer() && t.to_integer().is_odd()
        })
    }

    /// Euclidean distance from the origin to the nearest zero hyperplane.
    pub fn zero_distance(&self) -> f64 {
        self.diffs
            .iter()
            .filter(|d| !d.is_zero())
            .map(|d| 1.0 / (2.0 * d.to_f64().expect("diff fits f64").abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Recognizes B as a coordinatewise product of at-most-two-element digit
/// sets; None when B has no such structure.
pub fn product_form(b: &[IntVector]) -> Option<ProductMask> {
    if b.is_empty() {
        return None;
    }
    let d = b[0].dim();
    let translation = b.iter().min().expect("non-empty").clone();
    let shifted: Vec<IntVector> = b.iter().map(|v| v.sub(&translation)).collect();

    let mut diffs = Vec::with_capacity(d);
    for i in 0..d {
        let mut values: Vec<BigInt> =
            shifted.iter().map(|v| v.coords[i].clone()).collect();
        values.sort();
        values.dedup();
        match values.len() {
            1 => diffs.push(BigInt::zero()),
            2 => {
                if !values[0].is_zero() {
                    return None;
                }
                diffs.push(values[1].clone())
            }
            _ => return None,
        }
    }
    // Every combination of per-axis values must be present, exactly once.
    let expected: usize = diffs.iter().map(|d| if d.is_zero() { 1 } else { 2 }).product();
    if expected != b.len() {
        return None;
    }
    let set: std::collections::HashSet<Vec<BigInt>> =
        shifted.iter().map(|v| v.coords.clone()).collect();
    if set.len() != b.len() {
        return None;
    }
    let axes: Vec<usize> =
        (0..d).filter(|&i| !diffs[i].is_zero()).collect();
    for bits in 0..(1usize << axes.len()) {
        let mut v = vec![BigInt::zero(); d];
        for (pos, &axis) in axes.iter().enumerate() {
            if bits >> pos & 1 == 1 {
                v[axis] = diffs[axis].clone();
            }
        }
        if !set.contains(&v) {
            return None;
        }
    }
    Some(ProductMask { translation, diffs })
}

fn apply_inverse_transpose_exact(
    adj_t: &IntMatrix,
    det: &BigInt,
    xi: &[BigRational],
) -> Vec<BigRational> {
    let det_rat = BigRational::from_integer(det.clone());
    adj_t.apply_rational(xi).into_iter().map(|x| x / &det_rat).collect()
}

fn rational_norm_f64(xi: &[BigRational]) -> f64 {
    xi.iter()
        .map(|x| {
            let v = x.to_f64().expect("coordinate fits f64");
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Exact test whether some (R^T)^{-j} xi with 1 <= j <= max_j lies on a zero
/// hyperplane of M_B; requires a product-form digit set.
pub fn zero_membership_exact(
    r: &IntMatrix,
    b: &[IntVector],
    xi: &[BigRational],
    max_j: u32,
) -> Result<bool> {
    let pm = product_form(b)
        .ok_or_else(|| Error::Unsupported("mask is not a coordinate product".into()))?;
    let rt = r.transpose();
    let adj_t = rt.adjugate();
    let det = rt.det();
    let mut eta = xi.to_vec();
    for _ in 0..max_j {
        eta = apply_inverse_transpose_exact(&adj_t, &det, &eta);
        if pm.on_zero_hyperplane(&eta) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Exact and certified zero test for the transform: decides whether xi lies
/// in the zero set of the measure transform by iterating (R^T)^{-j} xi until
/// the certified envelope guarantees all later iterates stay strictly inside
/// the zero-free ball around the origin.
pub fn certified_zero(r: &IntMatrix, b: &[IntVector], xi: &[BigRational]) -> Result<bool> {
    let pm = product_form(b)
        .ok_or_else(|| Error::Unsupported("mask is not a coordinate product".into()))?;
    let rho = pm.zero_distance();
    if !rho.is_finite() {
        // No zero hyperplanes at all (constant-coordinate digits).
        return Ok(false);
    }
    let env = InversePowerEnvelope::new(r)?;
    let rt = r.transpose();
    let adj_t = rt.adjugate();
    let det = rt.det();
    let mut eta = xi.to_vec();
    let mut j = 0u32;
    loop {
        // Once sup_m ||(R^T)^{-m}|| * ||eta|| < rho, no later iterate can
        // reach a zero hyperplane.
        if rational_norm_f64(&eta) * (1.0 + 1e-9) * env.sup_bound < rho {
            return Ok(false);
        }
        eta = apply_inverse_transpose_exact(&adj_t, &det, &eta);
        if pm.on_zero_hyperplane(&eta) {
            return Ok(true);
        }
        j += 1;
        assert!(j < 10_000, "certified zero iteration runaway");
    }
}

/// One grid row of the obstruction scan.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub xi: Vec<f64>,
    pub best_k: Vec<i64>,
    pub abs_mu_hat: f64,
}

/// An exactly-certified periodic zero: max over every k in the window of
/// |transform(point + k)| is exactly 0.
#[derive(Clone, Debug)]
pub struct ObstructionWitness {
    pub point: Vec<BigRational>,
    pub window: i64,
}

/// Result of [`z_set_scan`]: grid minima plus any exact obstruction found.
#[derive(Clone, Debug)]
pub struct ScanReport {
    pub grid_resolution: u32,
    pub window: i64,
    pub rows: Vec<ScanRow>,
    pub min_max_abs: f64,
    pub argmin: Vec<f64>,
    /// Lipschitz constant 2 pi r_T of the transform: between grid points the
    /// value can drop by at most this times half the grid diagonal.
    pub lipschitz: f64,
    pub obstruction: Option<ObstructionWitness>,
}

/// All integer vectors in [-window, window]^d, in lexicographic order.
pub fn integer_window(d: usize, window: i64) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * (2 * window as usize + 1));
        for base in &out {
            for k in -window..=window {
                let mut v = base.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn farey_fractions(max_denominator: u32) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero()];
    for q in 2..=max_denominator as i64 {
        for p in 1..q {
            if p.gcd(&q) == 1 {
                out.push(BigRational::new(BigInt::from(p), BigInt::from(q)));
            }
        }
    }
    out.sort();
    out
}

fn cartesian_rational(coords: &[BigRational], d: usize) -> Vec<Vec<BigRational>> {
    let mut out: Vec<Vec<BigRational>> = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * coords.len());
        for base in &out {
            for c in coords {
                let mut v = base.clone();
                v.push(c.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Scans the fundamental domain [0,1)^d for periodic-zero obstructions: for
/// each grid point xi, reports max over k in [-window, window]^d of
/// |transform(xi + k)| and the minimizing grid point.
///
/// When the mask is a coordinate product, a second exact pass tests every
/// rational point with coordinate denominators up to `exact_denominator_limit`
/// (points a uniform grid may miss); a point whose translates are all
/// certified zeros is returned as an obstruction witness. The numeric minimum
/// is evidence, not proof: the report carries the Lipschitz constant so
/// coverage gaps can be judged.
pub fn z_set_scan(
    r: &IntMatrix,
    b: &[IntVector],
    grid_resolution: u32,
    window: i64,
    tol: f64,
    exact_denominator_limit: u32,
    cap: u128,
) -> Result<ScanReport> {
    assert!(grid_resolution >= 1);
    assert!(window >= 0);
    let d = r.dim();
    let grid_points = (grid_resolution as u128)
        .checked_pow(d as u32)
        .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
    if grid_points > cap {
        return Err(Error::BudgetExceeded { needed: grid_points, cap });
    }

    let eval = FourierEvaluator::new(r, b)?;
    let offsets = integer_window(d, window);
    let eval_tol = (tol / 100.0).min(1e-9);

    let max_abs_at = |xi: &[f64]| -> (Vec<i64>, f64) {
        let mut best = (vec![0i64; d], -1.0f64);
        for k in &offsets {
            let shifted: Vec<f64> =
                xi.iter().zip(k).map(|(x, &ki)| x + ki as f64).collect();
            let v = eval.mu_hat(&shifted, eval_tol).norm();
            if v > best.1 {
                best = (k.clone(), v);
            }
        }
        best
    };

    // Grid pass, row-major order.
    let n = grid_resolution as usize;
    let total = (grid_points as usize).max(1);
    let rows: Vec<ScanRow> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = flat;
            let mut xi = vec![0.0f64; d];
            for c in (0..d).rev() {
                xi[c] = (idx % n) as f64 / n as f64;
                idx /= n;
            }
            let (best_k, abs) = max_abs_at(&xi);
            ScanRow { xi, best_k, abs_mu_hat: abs }
        })
        .collect();

    let mut min_max_abs = f64::INFINITY;
    let mut argmin = vec![0.0f64; d];
    for row in &rows {
        if row.abs_mu_hat < min_max_abs {
            min_max_abs = row.abs_mu_hat;
            argmin = row.xi.clone();
        }
    }

    // Exact pass over low-denominator rational points (product masks only).
    let mut obstruction = None;
    if product_form(b).is_some() {
        let coords = farey_fractions(exact_denominator_limit);
        let pool = cartesian_rational(&coords, d);
        if pool.len() as u128 > cap {
            return Err(Error::BudgetExceeded { needed: pool.len() as u128, cap });
        }
        let candidates: Vec<&Vec<BigRational>> = pool
            .par_iter()
            .filter(|point| {
                let xi: Vec<f64> =
                    point.iter().map(|x| x.to_f64().expect("fits")).collect();
                max_abs_at(&xi).1 < tol
            })
            .collect();
        'candidates: for point in candidates {
            for k in &offsets {
                let shifted: Vec<BigRational> = point
                    .iter()
                    .zip(k)
                    .map(|(x, &ki)| x + BigRational::from_integer(BigInt::from(ki)))
                    .collect();
                if !certified_zero(r, b, &shifted)? {
                    continue 'candidates;
                }
            }
            obstruction = Some(ObstructionWitness { point: point.clone(), window });
            break;
        }
    }

    Ok(ScanReport {
        grid_resolution,
        window,
        rows,
        min_max_abs,
        argmin,
        lipschitz: TWO_PI * eval.radius,
        obstruction,
    })
}

/// One stage of the 1D forward iteration.
#[derive(Clone, Debug)]
pub struct YStage {
    pub n: u32,
    pub elements: Vec<BigRational>,
    /// Elements of this stage that are integers.
    pub integer_hits: Vec<BigRational>,
}

/// Full forward-iteration report.
#[derive(Clone, Debug)]
pub struct YIteration {
    pub stages: Vec<YStage>,
    /// Bound |xi_0| + r_T(R, L) that every element must respect.
    pub bound: f64,
    pub bounded: bool,
    pub any_integer_hit: bool,
}

/// Exact forward iteration Y_0 = {xi_0},
/// Y_n = { (xi + l)/R : xi in Y_{n-1}, l in L, M_B((xi + l)/R) != 0 }.
///
/// The mask-zero filter is exact for two-digit B (single zero family of
/// hyperplanes) and numeric with margin 1e-10 otherwise. Reports per-stage
/// elements, integer hits, and whether the boundedness estimate
/// |xi| <= |xi_0| + r_T(R, L) held throughout.
pub fn y_iteration_1d(
    r: &IntMatrix,
    b: &[IntVector],
    l: &[IntVector],
    xi0: &BigRational,
    max_n: u32,
    cap: u128,
) -> Result<YIteration> {
    if r.dim() != 1 {
        return Err(Error::DimensionNot1(r.dim()));
    }
    let r_scalar = r.entry(0, 0).clone();
    let exact_mask = if b.len() == 2 { product_form(b) } else { None };

    let radius = crate::digits::attractor_radius_bound(r, l)?;
    let bound = xi0.to_f64().expect("fits") .abs() + radius;

    let mut stages = Vec::with_capacity(max_n as usize + 1);
    stages.push(YStage {
        n: 0,
        elements: vec![xi0.clone()],
        integer_hits: if xi0.is_integer() { vec![xi0.clone()] } else { vec![] },
    });
    let mut bounded = xi0.to_f64().expect("fits").abs() <= bound + 1e-12;
    let mut any_integer_hit = stages[0].integer_hits.len() > 0;

    for n in 1..=max_n {
        let prev = &stages[n as usize - 1].elements;
        let mut next: Vec<BigRational> = Vec::new();
        for xi in prev {
            for ell in l {
                let tau = (xi + BigRational::from_integer(ell.coords[0].clone()))
                    / BigRational::from_integer(r_scalar.clone());
                let keep = match &exact_mask {
                    Some(pm) => !pm.on_zero_hyperplane(std::slice::from_ref(&tau)),
                    None => mask_eval_rational(b, std::slice::from_ref(&tau)).norm() > 1e-10,
                };
                if keep {
                    next.push(tau);
                }
            }
        }
        next.sort();
        next.dedup();
        if next.len() as u128 > cap {
            return Err(Error::BudgetExceeded { needed: next.len() as u128, cap });
        }
        let integer_hits: Vec<BigRational> =
            next.iter().filter(|x| x.is_integer()).cloned().collect();
        for x in &next {
            if x.to_f64().expect("fits").abs() > bound + 1e-12 {
                bounded = false;
            }
        }
        any_integer_hit |= !integer_hits.is_empty();
        stages.push(YStage { n, elements: next, integer_hits });
    }

    Ok(YIteration { stages, bound, bounded, any_integer_hit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::{sample_attractor, DEFAULT_BUDGET_CAP};
    use approx::assert_abs_diff_eq;

    fn v(coords: &[i64]) -> IntVector {
        IntVector::from_i64(coords)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn quarter() -> (IntMatrix, Vec<IntVector>) {
        (IntMatrix::from_rows(&[vec![4]]), vec![v(&[0]), v(&[2])])
    }

    fn planar_shear_2() -> (IntMatrix, Vec<IntVector>) {
        (
            IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]),
            vec![v(&[0, 0]), v(&[0, 3]), v(&[1, 0]), v(&[1, 3])],
        )
    }

    #[test]
    fn mask_at_origin_is_one() {
        let (_, b) = quarter();
        let val = mask_eval(&b, &[0.0]);
        assert_abs_diff_eq!(val.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(val.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mask_zero_at_quarter_point() {
        let (_, b) = quarter();
        assert!(mask_eval(&b, &[0.25]).norm() < 1e-15);
    }

    #[test]
    fn mask_zero_on_half_line_in_2d() {
        let (_, b) = planar_shear_2();
        assert!(mask_eval(&b, &[0.5, 0.37]).norm() < 1e-14);
    }

    #[test]
    fn mask_modulus_bounded_by_one() {
        let (_, b) = planar_shear_2();
        for i in 0..50 {
            let xi = [i as f64 * 0.173, i as f64 * 0.311];
            assert!(mask_eval(&b, &xi).norm() <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn mask_rational_matches_float() {
        let (_, b) = planar_shear_2();
        let exact = mask_eval_rational(&b, &[rat(1, 3), rat(2, 7)]);
        let float = mask_eval(&b, &[1.0 / 3.0, 2.0 / 7.0]);
        assert_abs_diff_eq!(exact.re, float.re, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.im, float.im, epsilon = 1e-12);
    }

    #[test]
    fn mu_hat_at_origin_is_one() {
        let (r, b) = quarter();
        let val = mu_hat(&r, &b, &[0.0], 1e-10).unwrap();
        assert_abs_diff_eq!(val.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mu_hat_vanishes_at_one_for_quarter() {
        let (r, b) = quarter();
        // First factor is the mask at 1/4, an exact zero.
        assert!(mu_hat(&r, &b, &[1.0], 1e-10).unwrap().norm() < 1e-14);
    }

    #[test]
    fn mu_hat_matches_attractor_riemann_sum() {
        let (r, b) = quarter();
        let xi = 0.3f64;
        let val = mu_hat(&r, &b, &[xi], 1e-8).unwrap();
        let sample = sample_attractor(&r, &b, 14, DEFAULT_BUDGET_CAP).unwrap();
        let mut acc = Complex::new(0.0, 0.0);
        for p in &sample.points {
            let x = p.point[0].to_f64().unwrap();
            acc += Complex::from_polar(1.0, -TWO_PI * xi * x);
        }
        acc /= sample.points.len() as f64;
        assert!((val - acc).norm() < 1e-6);
    }

    #[test]
    fn empirical_mean_equals_mask_product() {
        // Mean of e^{-2 pi i <xi, x>} over the depth-n sample equals the
        // finite product of masks at (R^T)^{-j} xi, j = 1..n.
        let (r, b) = planar_shear_2();
        let depth = 3;
        let sample = sample_attractor(&r, &b, depth, DEFAULT_BUDGET_CAP).unwrap();
        let xi = [0.37, -1.21];
        let mut mean = Complex::new(0.0, 0.0);
        for p in sample.points_f64() {
            let phase: f64 = xi.iter().zip(&p).map(|(a, b)| a * b).sum();
            mean += Complex::from_polar(1.0, -TWO_PI * phase);
        }
        mean /= sample.points.len() as f64;

        let det = r.det().to_f64().unwrap();
        let rinv_t = (r.adjugate().to_f64() / det).transpose();
        let mut eta = nalgebra::DVector::from_column_slice(&xi);
        let mut prod = Complex::new(1.0, 0.0);
        for _ in 0..depth {
            eta = &rinv_t * eta;
            let pt: Vec<f64> = eta.iter().copied().collect();
            prod *= mask_eval(&b, &pt);
        }
        assert!((mean - prod).norm() < 1e-10);
    }

    #[test]
    fn refinement_identity_holds() {
        let (r, b) = planar_shear_2();
        let eval = FourierEvaluator::new(&r, &b).unwrap();
        let tol = 1e-10;
        let det = r.det().to_f64().unwrap();
        let rinv_t = (r.adjugate().to_f64() / det).transpose();
        for i in 0..20 {
            let xi = [0.77 * i as f64 - 3.1, 0.41 * i as f64 + 0.2];
            let eta_v = &rinv_t * nalgebra::DVector::from_column_slice(&xi);
            let eta: Vec<f64> = eta_v.iter().copied().collect();
            let lhs = eval.mu_hat(&xi, tol);
            let rhs = mask_eval(&b, &eta) * eval.mu_hat(&eta, tol);
            assert!((lhs - rhs).norm() < 2.0 * tol + 1e-12);
        }
    }

    #[test]
    fn product_form_recognizes_presets() {
        let (_, b) = quarter();
        let pm = product_form(&b).unwrap();
        assert_eq!(pm.diffs, vec![BigInt::from(2)]);

        let (_, b2) = planar_shear_2();
        let pm2 = product_form(&b2).unwrap();
        assert_eq!(pm2.diffs, vec![BigInt::from(1), BigInt::from(3)]);

        // Four digits that are not a coordinate product.
        let gasket_like = [v(&[0, 0]), v(&[1, 0]), v(&[0, 1]), v(&[1, 2])];
        assert!(product_form(&gasket_like).is_none());
    }

    #[test]
    fn zero_membership_third_line_points() {
        let (r, b) = planar_shear_2();
        // (0, 1/3) and its integer translates are exact zeros.
        assert!(zero_membership_exact(&r, &b, &[rat(0, 1), rat(1, 3)], 12).unwrap());
        let shifted = [rat(7, 1), rat(1, 3) - rat(4, 1)];
        assert!(zero_membership_exact(&r, &b, &shifted, 12).unwrap());
        // The origin is never a zero.
        assert!(!zero_membership_exact(&r, &b, &[rat(0, 1), rat(0, 1)], 40).unwrap());
    }

    #[test]
    fn zero_membership_implies_small_transform() {
        let (r, b) = planar_shear_2();
        let points =
            [[rat(0, 1), rat(1, 3)], [rat(2, 1), rat(-2, 3)], [rat(-1, 1), rat(4, 3)]];
        for p in &points {
            assert!(zero_membership_exact(&r, &b, p, 12).unwrap());
            let xi: Vec<f64> = p.iter().map(|x| x.to_f64().unwrap()).collect();
            assert!(mu_hat(&r, &b, &xi, 1e-10).unwrap().norm() < 1e-9);
        }
    }

    #[test]
    fn certified_zero_agrees_with_bounded_search() {
        let (r, b) = planar_shear_2();
        let zeros = [[rat(0, 1), rat(1, 3)], [rat(5, 1), rat(7, 3)]];
        for p in &zeros {
            assert!(certified_zero(&r, &b, p).unwrap());
        }
        let nonzeros = [[rat(0, 1), rat(0, 1)], [rat(1, 2), rat(1, 5)], [rat(3, 1), rat(1, 7)]];
        for p in &nonzeros {
            assert_eq!(
                certified_zero(&r, &b, p).unwrap(),
                zero_membership_exact(&r, &b, p, 60).unwrap()
            );
        }
    }

    #[test]
    fn certified_zero_rejects_quarter_nonzeros() {
        let (r, b) = quarter();
        assert!(certified_zero(&r, &b, &[rat(1, 1)]).unwrap());
        assert!(!certified_zero(&r, &b, &[rat(1, 3)]).unwrap());
        assert!(!certified_zero(&r, &b, &[rat(0, 1)]).unwrap());
    }

    #[test]
    fn scan_quarter_finds_no_obstruction() {
        let (r, b) = quarter();
        let rep = z_set_scan(&r, &b, 16, 4, 1e-6, 8, DEFAULT_BUDGET_CAP).unwrap();
        assert!(rep.min_max_abs > 0.01);
        assert!(rep.obstruction.is_none());
        // The origin row attains |mu_hat(0)| = 1.
        let origin_row = &rep.rows[0];
        assert!(origin_row.abs_mu_hat >= 1.0 - 1e-9);
    }

    #[test]
    fn scan_flags_shear_obstruction_off_grid() {
        let (r, b) = planar_shear_2();
        // Grid 8 has no thirds; the exact pass must still find (0, 1/3).
        let rep = z_set_scan(&r, &b, 8, 4, 1e-6, 6, DEFAULT_BUDGET_CAP).unwrap();
        let w = rep.obstruction.expect("obstruction expected");
        assert_eq!(w.point, vec![rat(0, 1), rat(1, 3)]);
    }

    #[test]
    fn y_iteration_keeps_zero_fixed() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let b = [v(&[0]), v(&[1])];
        let l = [v(&[0]), v(&[2])];
        let it =
            y_iteration_1d(&r, &b, &l, &BigRational::zero(), 6, DEFAULT_BUDGET_CAP).unwrap();
        for stage in &it.stages {
            assert!(!stage.elements.is_empty());
            assert!(stage.elements.contains(&BigRational::zero()));
        }
        assert!(it.any_integer_hit);
        assert!(it.bounded);
    }

    #[test]
    fn y_iteration_drops_masked_branch() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let b = [v(&[0]), v(&[2])];
        let l = [v(&[0]), v(&[1])];
        let it =
            y_iteration_1d(&r, &b, &l, &BigRational::zero(), 3, DEFAULT_BUDGET_CAP).unwrap();
        // tau_1(0) = 1/4 is a mask zero and must be dropped.
        assert_eq!(it.stages[1].elements, vec![BigRational::zero()]);
    }

    #[test]
    fn y_iteration_stays_bounded_from_third() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let b = [v(&[0]), v(&[1])];
        let l = [v(&[0]), v(&[2])];
        let it = y_iteration_1d(&r, &b, &l, &rat(1, 3), 8, DEFAULT_BUDGET_CAP).unwrap();
        assert!(it.bounded);
        let bound = rat(1, 3).to_f64().unwrap() + 2.0 / 3.0;
        for stage in &it.stages {
            for x in &stage.elements {
                assert!(x.to_f64().unwrap().abs() <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn y_iteration_rejects_higher_dimension() {
        let r = IntMatrix::from_rows(&[vec![2, 0], vec![0, 2]]);
        let b = [v(&[0, 0]), v(&[1, 0])];
        let err = y_iteration_1d(&r, &b, &b, &BigRational::zero(), 2, DEFAULT_BUDGET_CAP)
            .unwrap_err();
        assert!(matches!(err, Error::DimensionNot1(2)));
    }
}
