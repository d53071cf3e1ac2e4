//! Verification and construction of compatible digit/frequency pairs: a pair
//! of equal-size integer digit sets whose normalized exponential matrix is
//! unitary, together with product towers and the spanning-simplex family.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;

use crate::digits::{dual_expand, expand_digits};
use crate::error::{Error, Result};
use crate::lattice::{find_residue_collision, IntMatrix, IntVector};
use crate::linalg::centered_unit_fraction;

/// A verified compatible triple: the normalized matrix
/// `N^{-1/2} [exp(2 pi i <R^-1 b, l>)]` is unitary to within `deviation`.
#[derive(Debug, Clone)]
pub struct HadamardTriple {
    /// Expanding integer base matrix.
    pub r: IntMatrix,
    /// Digit set, sorted; `|b| = |l|`.
    pub b: Vec<IntVector>,
    /// Frequency set, sorted; paired with `b`.
    pub l: Vec<IntVector>,
    /// Frobenius distance of the exponential Gram matrix from the identity.
    pub deviation: f64,
}

/// Outcome of [`verify_triple`]: acceptance with the certified triple, or a
/// rejection that reports the measured deviation and which of the two
/// residue-distinctness preconditions (if any) fails.
#[derive(Debug, Clone)]
pub enum VerifyOutcome {
    /// The exponential matrix is unitary to within the requested tolerance.
    Accepted(HadamardTriple),
    /// The matrix is not unitary at the requested tolerance.
    Rejected {
        /// Frobenius distance of the Gram matrix from the identity.
        deviation: f64,
        /// Whether the digit set has distinct residues modulo `R Z^d`.
        b_simple: bool,
        /// Whether the frequency set has distinct residues modulo `R^T Z^d`.
        l_simple: bool,
    },
}

impl VerifyOutcome {
    /// True when the outcome is an acceptance.
    pub fn is_accepted(&self) -> bool {
        matches!(self, VerifyOutcome::Accepted(_))
    }

    /// Unwraps the accepted triple, panicking on a rejection.
    pub fn expect_accepted(self, context: &str) -> HadamardTriple {
        match self {
            VerifyOutcome::Accepted(t) => t,
            VerifyOutcome::Rejected { deviation, b_simple, l_simple } => panic!(
                "{context}: rejected (deviation {deviation:.3e}, digit residues distinct: \
                 {b_simple}, frequency residues distinct: {l_simple})"
            ),
        }
    }
}

/// The normalized exponential matrix of a candidate pair: row `i`, column `j`
/// holds `N^{-1/2} exp(2 pi i <R^-1 b_j, l_i>)`.
///
/// Each phase is the exact rational `<adj(R) b_j, l_i> / det(R)` reduced
/// modulo 1 before exponentiation, so entries are accurate to one ulp of the
/// trig evaluation regardless of the size of the digits.
pub fn exponential_matrix(
    r: &IntMatrix,
    b: &[IntVector],
    l: &[IntVector],
) -> DMatrix<Complex<f64>> {
    let n = b.len();
    assert_eq!(n, l.len(), "digit and frequency sets must have equal size");
    let adj = r.adjugate();
    let det = r.det().clone();
    let scale = 1.0 / (n as f64).sqrt();
    let adj_b: Vec<IntVector> = b.iter().map(|v| adj.apply(v)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let num: BigInt = adj_b[j].dot(&l[i]);
        let phase = centered_unit_fraction(&num, &det);
        Complex::from_polar(scale, std::f64::consts::TAU * phase)
    })
}

/// Frobenius distance of `H^H H` from the identity for the exponential
/// matrix of the pair.
pub fn triple_deviation(r: &IntMatrix, b: &[IntVector], l: &[IntVector]) -> f64 {
    let h = exponential_matrix(r, b, l);
    gram_identity_distance(&h)
}

fn gram_identity_distance(h: &DMatrix<Complex<f64>>) -> f64 {
    let n = h.ncols();
    let gram = h.adjoint() * h;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut z = gram[(i, j)];
            if i == j {
                z -= Complex::new(1.0, 0.0);
            }
            sum += z.norm_sqr();
        }
    }
    sum.sqrt()
}

/// Decides whether `(R, B, L)` is a compatible triple at tolerance `tol`.
///
/// Acceptance requires the exponential matrix to be unitary to within `tol`
/// in Frobenius norm; unitarity forces distinct residues of `B` modulo
/// `R Z^d` and of `L` modulo `R^T Z^d`, and the rejection branch reports
/// which of those two conditions fails as a diagnostic. Errors:
/// [`Error::SizeMismatch`] when the sets have different sizes,
/// [`Error::NonExpansive`] / [`Error::Indeterminate`] from the expansiveness
/// check on `R`.
pub fn verify_triple(
    r: &IntMatrix,
    b: &[IntVector],
    l: &[IntVector],
    tol: f64,
) -> Result<VerifyOutcome> {
    if b.len() != l.len() {
        return Err(Error::SizeMismatch { b: b.len(), l: l.len() });
    }
    if !crate::lattice::is_expansive(r)? {
        return Err(Error::NonExpansive);
    }
    let rt = r.transpose();
    let b_simple = find_residue_collision(r, b).is_none();
    let l_simple = find_residue_collision(&rt, l).is_none();
    let deviation = triple_deviation(r, b, l);
    if deviation <= tol && b_simple && l_simple {
        let mut b = b.to_vec();
        let mut l = l.to_vec();
        b.sort();
        l.sort();
        Ok(VerifyOutcome::Accepted(HadamardTriple { r: r.clone(), b, l, deviation }))
    } else {
        Ok(VerifyOutcome::Rejected { deviation, b_simple, l_simple })
    }
}

/// The level-`k` product triple `(R^k, B_k, L_k^T)` of a verified triple,
/// re-verified at tolerance `tol`.
///
/// `B_k` is the level-`k` digit expansion of `B` under `R` and `L_k^T` the
/// level-`k` expansion of `L` under `R^T`; both have `N^k` elements, capped
/// by `cap` ([`Error::BudgetExceeded`]). The product of a compatible triple
/// is again compatible, so a rejection here can only mean the requested
/// tolerance is tighter than the accumulated floating-point error; it is
/// reported as [`Error::Unsupported`] with the measured deviation.
pub fn product_triple(
    triple: &HadamardTriple,
    k: u32,
    tol: f64,
    cap: u128,
) -> Result<HadamardTriple> {
    let bk = expand_digits(&triple.r, &triple.b, k, cap)?;
    let lk = dual_expand(&triple.r, &triple.l, k, cap)?;
    let rk = triple.r.pow(k);
    match verify_triple(&rk, &bk.elements, &lk.elements, tol)? {
        VerifyOutcome::Accepted(t) => Ok(t),
        VerifyOutcome::Rejected { deviation, .. } => Err(Error::Unsupported(format!(
            "product triple at level {k} measured deviation {deviation:.3e} > tolerance {tol:.3e}"
        ))),
    }
}

/// Builds the spanning-simplex triple in dimension `d = m - 1` from an
/// `m x m` matrix `h` with entries in `{-1, +1}`.
///
/// Preconditions ([`Error::NotRealHadamard`] otherwise): all entries are
/// `+1` or `-1`, `h^T h = m I`, and the first row and first column are all
/// ones. The triple is `R = 2 I_d`, `B = {0, e_1, ..., e_d}`, and
/// `L = {l_0, ..., l_{d-1}}` with `l_j[i] = (1 - h[i][j]) / 2` for
/// `i = 1..=d`, verified before being returned.
pub fn gasket_triple(h: &IntMatrix) -> Result<HadamardTriple> {
    let m = h.dim();
    if m < 2 {
        return Err(Error::NotRealHadamard(format!("size {m} is below the minimum of 2")));
    }
    let one = BigInt::from(1);
    let minus_one = BigInt::from(-1);
    for i in 0..m {
        for j in 0..m {
            let e = h.entry(i, j);
            if *e != one && *e != minus_one {
                return Err(Error::NotRealHadamard(format!("entry ({i}, {j}) = {e} is not +-1")));
            }
        }
    }
    let gram = h.transpose().mul(h);
    let scaled_identity = {
        let mut rows = vec![vec![0i64; m]; m];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = m as i64;
        }
        IntMatrix::from_rows(&rows)
    };
    if gram != scaled_identity {
        return Err(Error::NotRealHadamard(format!(
            "columns are not orthogonal: h^T h differs from {m} I"
        )));
    }
    for j in 0..m {
        if *h.entry(0, j) != one {
            return Err(Error::NotRealHadamard(format!("first row entry {j} is not +1")));
        }
        if *h.entry(j, 0) != one {
            return Err(Error::NotRealHadamard(format!("first column entry {j} is not +1")));
        }
    }

    let d = m - 1;
    let mut r_rows = vec![vec![0i64; d]; d];
    for (i, row) in r_rows.iter_mut().enumerate() {
        row[i] = 2;
    }
    let r = IntMatrix::from_rows(&r_rows);
    let mut b = vec![IntVector::from_i64(&vec![0; d])];
    for i in 0..d {
        let mut e = vec![0i64; d];
        e[i] = 1;
        b.push(IntVector::from_i64(&e));
    }
    let l: Vec<IntVector> = (0..m)
        .map(|j| {
            let coords: Vec<i64> = (1..m)
                .map(|i| if *h.entry(i, j) == one { 0 } else { 1 })
                .collect();
            IntVector::from_i64(&coords)
        })
        .collect();
    Ok(verify_triple(&r, &b, &l, 1e-12)?.expect_accepted("spanning-simplex construction"))
}
