//! Exact integer-matrix and lattice algebra: expansiveness, residue classes
//! modulo R(Z^d), the smallest R-invariant lattice containing a digit set, and
//! dimension/lattice reduction of a pair (R, B).
//!
//! Everything here is arbitrary-precision integer arithmetic; floating point
//! enters only in the eigenvalue test of [`is_expansive`], which reports an
//! explicit indeterminate verdict near the unit circle instead of rounding.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Margin around modulus 1 inside which the eigenvalue test refuses to decide.
pub const TAU_EIG: f64 = 1e-9;

/// A length-d integer vector with arbitrary-precision coordinates.
///
/// Ordering is lexicographic on the coordinates, which gives every set of
/// vectors in the crate a canonical sorted form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct IntVector {
    pub coords: Vec<BigInt>,
}

impl IntVector {
    pub fn new(coords: Vec<BigInt>) -> Self {
        IntVector { coords }
    }

    pub fn from_i64(coords: &[i64]) -> Self {
        IntVector { coords: coords.iter().map(|&c| BigInt::from(c)).collect() }
    }

    pub fn zero(d: usize) -> Self {
        IntVector { coords: vec![BigInt::zero(); d] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &IntVector) -> IntVector {
        IntVector::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &IntVector) -> IntVector {
        IntVector::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> IntVector {
        IntVector::new(self.coords.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, k: &BigInt) -> IntVector {
        IntVector::new(self.coords.iter().map(|a| a * k).collect())
    }

    pub fn dot(&self, other: &IntVector) -> BigInt {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    /// Coordinates as i64, when they fit.
    pub fn to_i64(&self) -> Option<Vec<i64>> {
        self.coords.iter().map(|c| c.to_i64()).collect()
    }

    /// Lossy float view, for numeric evaluators.
    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.to_f64().expect("coordinate out of f64 range")).collect()
    }

    /// Coordinates as exact rationals.
    pub fn to_rational(&self) -> Vec<BigRational> {
        self.coords.iter().map(|c| BigRational::from_integer(c.clone())).collect()
    }
}

/// A square integer matrix with arbitrary-precision entries and a cached
/// exact determinant.
#[derive(Clone, Debug)]
pub struct IntMatrix {
    d: usize,
    entries: Vec<BigInt>, // row-major
    det_cache: OnceLock<BigInt>,
}

impl PartialEq for IntMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.entries == other.entries
    }
}
impl Eq for IntMatrix {}

impl IntMatrix {
    pub fn new(d: usize, entries: Vec<BigInt>) -> Self {
        assert_eq!(entries.len(), d * d, "entry count must be d*d");
        IntMatrix { d, entries, det_cache: OnceLock::new() }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let d = rows.len();
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            assert_eq!(row.len(), d, "matrix must be square");
            entries.extend(row.iter().map(|&v| BigInt::from(v)));
        }
        IntMatrix::new(d, entries)
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![BigInt::zero(); d * d];
        for i in 0..d {
            entries[i * d + i] = BigInt::one();
        }
        IntMatrix::new(d, entries)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.d + j]
    }

    pub fn is_identity(&self) -> bool {
        *self == IntMatrix::identity(self.d)
    }

    pub fn transpose(&self) -> IntMatrix {
        let d = self.d;
        let mut entries = vec![BigInt::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entry(i, j).clone();
            }
        }
        IntMatrix::new(d, entries)
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.d, other.d);
        let d = self.d;
        let mut entries = vec![BigInt::zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entry(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entry(k, j);
                }
            }
        }
        IntMatrix::new(d, entries)
    }

    pub fn pow(&self, n: u32) -> IntMatrix {
        let mut acc = IntMatrix::identity(self.d);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.d, other.d);
        let entries =
            self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        IntMatrix::new(self.d, entries)
    }

    pub fn apply(&self, v: &IntVector) -> IntVector {
        assert_eq!(v.dim(), self.d);
        let mut out = vec![BigInt::zero(); self.d];
        for i in 0..self.d {
            for j in 0..self.d {
                out[i] += self.entry(i, j) * &v.coords[j];
            }
        }
        IntVector::new(out)
    }

    pub fn apply_rational(&self, v: &[BigRational]) -> Vec<BigRational> {
        assert_eq!(v.len(), self.d);
        let mut out = vec![BigRational::zero(); self.d];
        for i in 0..self.d {
            for j in 0..self.d {
                out[i] += BigRational::from_integer(self.entry(i, j).clone()) * &v[j];
            }
        }
        out
    }

    /// Exact determinant (Bareiss fraction-free elimination), cached.
    pub fn det(&self) -> BigInt {
        self.det_cache
            .get_or_init(|| {
                let d = self.d;
                if d == 0 {
                    return BigInt::one();
                }
                let mut m = self.entries.clone();
                let mut sign = 1i32;
                let mut prev = BigInt::one();
                for k in 0..d - 1 {
                    if m[k * d + k].is_zero() {
                        let swap = (k + 1..d).find(|&i| !m[i * d + k].is_zero());
                        match swap {
                            None => return BigInt::zero(),
                            Some(i) => {
                                for j in 0..d {
                                    m.swap(k * d + j, i * d + j);
                                }
                                sign = -sign;
                            }
                        }
                    }
                    for i in k + 1..d {
                        for j in k + 1..d {
                            let num = &m[i * d + j] * &m[k * d + k]
                                - &m[i * d + k] * &m[k * d + j];
                            m[i * d + j] = num / &prev; // exact by Bareiss
                        }
                    }
                    prev = m[k * d + k].clone();
                }
                let last = m[(d - 1) * d + (d - 1)].clone();
                if sign < 0 {
                    -last
                } else {
                    last
                }
            })
            .clone()
    }

    /// Adjugate matrix: adj(R) = det(R) * R^{-1}, exact.
    pub fn adjugate(&self) -> IntMatrix {
        let d = self.d;
        if d == 1 {
            return IntMatrix::identity(1);
        }
        let mut entries = vec![BigInt::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                // Cofactor C_ji for the (i, j) entry of the adjugate.
                let mut minor = Vec::with_capacity((d - 1) * (d - 1));
                for r in 0..d {
                    if r == j {
                        continue;
                    }
                    for c in 0..d {
                        if c == i {
                            continue;
                        }
                        minor.push(self.entry(r, c).clone());
                    }
                }
                let cof = IntMatrix::new(d - 1, minor).det();
                entries[i * d + j] = if (i + j) % 2 == 0 { cof } else { -cof };
            }
        }
        IntMatrix::new(d, entries)
    }

    /// Exact solve R x = rhs over the rationals; None when R is singular.
    pub fn solve_rational(&self, rhs: &[BigRational]) -> Option<Vec<BigRational>> {
        let det = self.det();
        if det.is_zero() {
            return None;
        }
        let adj = self.adjugate();
        let det_rat = BigRational::from_integer(det);
        Some(adj.apply_rational(rhs).into_iter().map(|x| x / &det_rat).collect())
    }

    /// Exact inverse when the matrix is unimodular (|det| = 1).
    pub fn inverse_unimodular(&self) -> Option<IntMatrix> {
        let det = self.det();
        if det.magnitude() != BigInt::one().magnitude() {
            return None;
        }
        let adj = self.adjugate();
        if det.is_negative() {
            Some(IntMatrix::new(self.d, adj.entries.iter().map(|e| -e).collect()))
        } else {
            Some(adj)
        }
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| {
            self.entry(i, j).to_f64().expect("entry out of f64 range")
        })
    }

    /// Entries as i64, when they fit.
    pub fn to_i64(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.entry(i, j).to_i64()).collect())
            .collect()
    }
}

/// Column-style Hermite normal form of an integer lattice: an echelon basis
/// with positive pivots and, in each pivot row, the entries of earlier basis
/// columns reduced into [0, pivot).
///
/// The form is canonical, so two generating sets span the same lattice if and
/// only if their `Hnf` bases are entrywise equal.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Hnf {
    pub d: usize,
    pub basis: Vec<IntVector>,
    pub pivot_rows: Vec<usize>,
}

impl Hnf {
    /// HNF of the lattice generated by the given vectors.
    pub fn of_generators(d: usize, gens: &[IntVector]) -> Hnf {
        let mut pool: Vec<Vec<BigInt>> = gens
            .iter()
            .filter(|g| !g.is_zero())
            .map(|g| {
                assert_eq!(g.dim(), d);
                g.coords.clone()
            })
            .collect();
        let mut basis: Vec<Vec<BigInt>> = Vec::new();
        let mut pivot_rows = Vec::new();

        for row in 0..d {
            // Gcd-eliminate until at most one pool column is nonzero at `row`.
            loop {
                let mut live: Vec<usize> =
                    (0..pool.len()).filter(|&i| !pool[i][row].is_zero()).collect();
                if live.len() <= 1 {
                    break;
                }
                live.sort_by_key(|&i| pool[i][row].magnitude().clone());
                let pivot = live[0];
                for &i in &live[1..] {
                    let q = pool[i][row].div_floor(&pool[pivot][row]);
                    for r in 0..d {
                        let sub = &q * &pool[pivot][r];
                        pool[i][r] -= sub;
                    }
                }
                pool.retain(|c| c.iter().any(|x| !x.is_zero()));
            }
            if let Some(i) = (0..pool.len()).find(|&i| !pool[i][row].is_zero()) {
                let mut col = pool.remove(i);
                if col[row].is_negative() {
                    for x in col.iter_mut() {
                        *x = -std::mem::take(x);
                    }
                }
                basis.push(col);
                pivot_rows.push(row);
            }
        }

        // Canonical reduction of earlier columns in each pivot row.
        for i in 0..basis.len() {
            let row = pivot_rows[i];
            for j in 0..i {
                let q = basis[j][row].div_floor(&basis[i][row]);
                if q.is_zero() {
                    continue;
                }
                for r in 0..d {
                    let sub = &q * &basis[i][r];
                    basis[j][r] -= sub;
                }
            }
        }

        Hnf { d, basis: basis.into_iter().map(IntVector::new).collect(), pivot_rows }
    }

    /// HNF of the column lattice of a square matrix.
    pub fn of_matrix(m: &IntMatrix) -> Hnf {
        let d = m.dim();
        let cols: Vec<IntVector> = (0..d)
            .map(|j| IntVector::new((0..d).map(|i| m.entry(i, j).clone()).collect()))
            .collect();
        Hnf::of_generators(d, &cols)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.d
    }

    /// Whether the lattice is exactly Z^d (basis HNF = identity).
    pub fn is_standard(&self) -> bool {
        self.is_full_rank()
            && self.basis.iter().enumerate().all(|(i, col)| {
                col.coords
                    .iter()
                    .enumerate()
                    .all(|(r, x)| if r == i { x.is_one() } else { x.is_zero() })
            })
    }

    /// Basis columns as a square matrix (full-rank lattices only).
    pub fn basis_matrix(&self) -> IntMatrix {
        assert!(self.is_full_rank(), "basis matrix needs a full-rank lattice");
        let d = self.d;
        let mut entries = vec![BigInt::zero(); d * d];
        for (j, col) in self.basis.iter().enumerate() {
            for i in 0..d {
                entries[i * d + j] = col.coords[i].clone();
            }
        }
        IntMatrix::new(d, entries)
    }

    /// Canonical representative of v + lattice in the fundamental
    /// parallelepiped of a full-rank lattice: coordinate at each pivot row
    /// lands in [0, pivot).
    pub fn reduce(&self, v: &IntVector) -> IntVector {
        assert!(self.is_full_rank(), "reduction needs a full-rank lattice");
        let mut w = v.coords.clone();
        for (i, col) in self.basis.iter().enumerate() {
            let row = self.pivot_rows[i];
            let q = w[row].div_floor(&col.coords[row]);
            if q.is_zero() {
                continue;
            }
            for r in 0..self.d {
                let sub = &q * &col.coords[r];
                w[r] -= sub;
            }
        }
        IntVector::new(w)
    }

    /// Canonical residue representatives of `Z^d` modulo a full-rank lattice,
    /// in lexicographic order: the box with coordinate `i` ranging over
    /// `[0, pivot_i)`. Every element is fixed by [`Hnf::reduce`], and the
    /// count is the covolume. Errors: [`Error::Unsupported`] for singular
    /// lattices, [`Error::BudgetExceeded`] when the covolume exceeds `cap`.
    pub fn residues(&self, cap: u128) -> Result<Vec<IntVector>> {
        if !self.is_full_rank() {
            return Err(Error::Unsupported(
                "residue enumeration needs a full-rank lattice".into(),
            ));
        }
        let pivots: Vec<u128> = (0..self.d)
            .map(|i| {
                let p = &self.basis[i].coords[self.pivot_rows[i]];
                p.to_u128().ok_or_else(|| {
                    Error::Unsupported(format!("pivot {p} exceeds the enumeration range"))
                })
            })
            .collect::<Result<_>>()?;
        let mut count: u128 = 1;
        for &p in &pivots {
            count = count
                .checked_mul(p)
                .ok_or(Error::BudgetExceeded { needed: u128::MAX, cap })?;
        }
        if count > cap {
            return Err(Error::BudgetExceeded { needed: count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut odometer = vec![0u128; self.d];
        loop {
            out.push(IntVector::new(
                odometer.iter().map(|&x| BigInt::from(x)).collect(),
            ));
            let mut row = self.d;
            while row > 0 {
                row -= 1;
                odometer[row] += 1;
                if odometer[row] < pivots[row] {
                    break;
                }
                odometer[row] = 0;
                if row == 0 {
                    return Ok(out);
                }
            }
            if self.d == 0 {
                return Ok(out);
            }
        }
    }

    /// Exact lattice membership.
    pub fn contains(&self, v: &IntVector) -> bool {
        let mut w = v.coords.clone();
        for (i, col) in self.basis.iter().enumerate() {
            let row = self.pivot_rows[i];
            if w[row].is_zero() {
                continue;
            }
            let (q, rem) = w[row].div_rem(&col.coords[row]);
            if !rem.is_zero() {
                return false;
            }
            for r in 0..self.d {
                let sub = &q * &col.coords[r];
                w[r] -= sub;
            }
        }
        w.iter().all(|x| x.is_zero())
    }
}

fn euler_phi(mut n: u32) -> u32 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Orders k for which a k-th root of unity can be an eigenvalue of a d x d
/// integer matrix (its degree phi(k) must fit in the characteristic polynomial).
fn unit_root_orders(d: usize) -> Vec<u32> {
    (1..=(3 * d * d + 4) as u32).filter(|&k| euler_phi(k) as usize <= d).collect()
}

/// Whether every eigenvalue of R has modulus strictly greater than 1.
///
/// Exact screens first: |det R| <= 1 and eigenvalues that are roots of unity
/// (det(R^k - I) = 0) decide the answer without floating point. The remaining
/// cases use numeric eigenvalues with a guard band of [`TAU_EIG`] around
/// modulus 1; inside the band the verdict is an explicit error.
pub fn is_expansive(r: &IntMatrix) -> Result<bool> {
    if r.det().magnitude() <= BigInt::one().magnitude() {
        return Ok(false);
    }
    let id = IntMatrix::identity(r.dim());
    for k in unit_root_orders(r.dim()) {
        if r.pow(k).sub(&id).det().is_zero() {
            return Ok(false);
        }
    }
    let eigs = r.to_f64().complex_eigenvalues();
    let min_mod = eigs.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
    if min_mod > 1.0 + TAU_EIG {
        Ok(true)
    } else if min_mod < 1.0 - TAU_EIG {
        Ok(false)
    } else {
        Err(Error::Indeterminate { modulus: min_mod, margin: TAU_EIG })
    }
}

/// Canonical representative of v + R(Z^d) in the fundamental parallelepiped
/// determined by the HNF of R. Two vectors reduce to the same representative
/// exactly when they differ by an element of R(Z^d).
pub fn residue_class(v: &IntVector, r: &IntMatrix) -> IntVector {
    Hnf::of_matrix(r).reduce(v)
}

/// Whether distinct elements of B fall into distinct residue classes mod R(Z^d).
pub fn is_simple_digit_set(r: &IntMatrix, b: &[IntVector]) -> bool {
    find_residue_collision(r, b).is_none()
}

/// First pair of digits sharing a residue class, if any.
pub fn find_residue_collision(r: &IntMatrix, b: &[IntVector]) -> Option<(IntVector, IntVector)> {
    let hnf = Hnf::of_matrix(r);
    let mut seen: std::collections::HashMap<Vec<BigInt>, usize> = std::collections::HashMap::new();
    for (idx, v) in b.iter().enumerate() {
        let red = hnf.reduce(v);
        if let Some(&prev) = seen.get(&red.coords) {
            return Some((b[prev].clone(), v.clone()));
        }
        seen.insert(red.coords, idx);
    }
    None
}

/// The smallest R-invariant lattice containing all differences of digit-set
/// expansions, together with rank flags and the base-point translation that
/// was applied to bring the digit set to contain 0.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub hnf: Hnf,
    pub rank: usize,
    pub full_rank: bool,
    pub equals_zd: bool,
    /// Base point subtracted from every digit before spanning.
    pub translation: IntVector,
}

/// Integer span of {R^j (b - b0) : b in B, 0 <= j <= d-1} in HNF, where b0 is
/// the lexicographically smallest digit. The Cayley-Hamilton theorem makes the
/// truncation at power d-1 exact: the span is already R-invariant.
pub fn invariant_lattice(r: &IntMatrix, b: &[IntVector]) -> Lattice {
    let d = r.dim();
    assert!(!b.is_empty(), "digit set must be non-empty");
    let b0 = b.iter().min().expect("non-empty").clone();
    let mut gens = Vec::new();
    for digit in b {
        let mut v = digit.sub(&b0);
        for _ in 0..d {
            gens.push(v.clone());
            v = r.apply(&v);
        }
    }
    let hnf = Hnf::of_generators(d, &gens);
    let rank = hnf.rank();
    Lattice {
        rank,
        full_rank: hnf.is_full_rank(),
        equals_zd: hnf.is_standard(),
        hnf,
        translation: b0,
    }
}

/// Unimodular M (|det M| = 1) such that M * W is in row-echelon form with its
/// nonzero rows on top; returns (M, rank of W).
fn row_echelon_unimodular(d: usize, w: &[IntVector]) -> (IntMatrix, usize) {
    let cols = w.len();
    // Working copy of W as rows-of-entries plus the tracked transform rows.
    let mut a: Vec<Vec<BigInt>> = (0..d)
        .map(|i| (0..cols).map(|j| w[j].coords[i].clone()).collect())
        .collect();
    let mut m: Vec<Vec<BigInt>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect();
    let mut pivot = 0usize;
    for col in 0..cols {
        if pivot >= d {
            break;
        }
        loop {
            let mut live: Vec<usize> =
                (pivot..d).filter(|&i| !a[i][col].is_zero()).collect();
            if live.len() <= 1 {
                break;
            }
            live.sort_by_key(|&i| a[i][col].magnitude().clone());
            let base = live[0];
            for &i in &live[1..] {
                let q = a[i][col].div_floor(&a[base][col]);
                for c in 0..cols {
                    let sub = &q * &a[base][c];
                    a[i][c] -= sub;
                }
                for c in 0..d {
                    let sub = &q * &m[base][c];
                    m[i][c] -= sub;
                }
            }
        }
        if let Some(i) = (pivot..d).find(|&i| !a[i][col].is_zero()) {
            a.swap(pivot, i);
            m.swap(pivot, i);
            pivot += 1;
        }
    }
    let entries = m.into_iter().flatten().collect();
    (IntMatrix::new(d, entries), pivot)
}

/// Result of the dimension/lattice reduction of a digit pair.
#[derive(Clone, Debug)]
pub struct ReducedPair {
    /// Reduced dilation (dimension `rank`).
    pub r: IntMatrix,
    /// Reduced digits, length-preserving with the input digit order.
    pub b: Vec<IntVector>,
    /// The change-of-coordinates matrix (see [`reduce_pair`] for its role
    /// in each branch).
    pub m: IntMatrix,
    pub rank: usize,
    /// Base point subtracted from the digits before reduction.
    pub translation: IntVector,
}

/// Normalizes a digit pair so the invariant lattice becomes Z^r.
///
/// Three branches, by the invariant lattice of (R, B - b0):
/// * already Z^d: returns the pair unchanged with M = I;
/// * full rank but not Z^d: M is the HNF basis matrix of the lattice, and the
///   result is (M^-1 R M, M^-1 (B - b0)), whose invariant lattice is Z^d;
/// * rank r < d: M is unimodular, M (B - b0) lands in Z^r x {0}, M R M^-1 is
///   block upper triangular, and the result is the leading r x r block with
///   the first r digit coordinates.
pub fn reduce_pair(r: &IntMatrix, b: &[IntVector]) -> Result<ReducedPair> {
    if let Some((first, second)) = find_residue_collision(r, b) {
        return Err(Error::NotSimpleDigitSet {
            first: first.to_i64().unwrap_or_default(),
            second: second.to_i64().unwrap_or_default(),
        });
    }
    let d = r.dim();
    let lat = invariant_lattice(r, b);
    let b0 = lat.translation.clone();
    let shifted: Vec<IntVector> = b.iter().map(|v| v.sub(&b0)).collect();

    if lat.equals_zd {
        return Ok(ReducedPair {
            r: r.clone(),
            b: shifted,
            m: IntMatrix::identity(d),
            rank: d,
            translation: b0,
        });
    }

    if lat.full_rank {
        let m = lat.hnf.basis_matrix();
        let r_tilde = conjugate_exact(r, &m)?;
        let b_tilde = shifted
            .iter()
            .map(|v| {
                let sol = m
                    .solve_rational(&v.to_rational())
                    .expect("full-rank basis is invertible");
                rational_to_int(&sol).map(IntVector::new).ok_or_else(|| {
                    Error::Unsupported("digit not in its own invariant lattice".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(ReducedPair { r: r_tilde, b: b_tilde, m, rank: d, translation: b0 });
    }

    // Rank-deficient branch: align the lattice with the first r coordinates.
    let rank = lat.rank;
    let (m, echelon_rank) = row_echelon_unimodular(d, &lat.hnf.basis);
    debug_assert_eq!(echelon_rank, rank);
    let m_inv = m.inverse_unimodular().expect("echelon transform is unimodular");
    let conj = m.mul(r).mul(&m_inv);
    // The lattice is R-invariant, so the bottom-left block must vanish.
    for i in rank..d {
        for j in 0..rank {
            assert!(
                conj.entry(i, j).is_zero(),
                "conjugated dilation is not block upper triangular"
            );
        }
    }
    let mut top = Vec::with_capacity(rank * rank);
    for i in 0..rank {
        for j in 0..rank {
            top.push(conj.entry(i, j).clone());
        }
    }
    let projected: Vec<IntVector> = shifted
        .iter()
        .map(|v| {
            let w = m.apply(v);
            assert!(
                w.coords[rank..].iter().all(|x| x.is_zero()),
                "digit escapes the invariant subspace"
            );
            IntVector::new(w.coords[..rank].to_vec())
        })
        .collect();
    Ok(ReducedPair {
        r: IntMatrix::new(rank, top),
        b: projected,
        m,
        rank,
        translation: b0,
    })
}

/// Exact M^-1 R M, erroring if the conjugation leaves the integers.
fn conjugate_exact(r: &IntMatrix, m: &IntMatrix) -> Result<IntMatrix> {
    let d = r.dim();
    let rm = r.mul(m);
    let mut entries = vec![BigInt::zero(); d * d];
    for j in 0..d {
        let col: Vec<BigRational> = (0..d)
            .map(|i| BigRational::from_integer(rm.entry(i, j).clone()))
            .collect();
        let sol = m.solve_rational(&col).ok_or_else(|| {
            Error::Unsupported("change-of-basis matrix is singular".into())
        })?;
        let int_col = rational_to_int(&sol).ok_or_else(|| {
            Error::Unsupported("conjugated dilation is not an integer matrix".into())
        })?;
        for i in 0..d {
            entries[i * d + j] = int_col[i].clone();
        }
    }
    Ok(IntMatrix::new(d, entries))
}

fn rational_to_int(v: &[BigRational]) -> Option<Vec<BigInt>> {
    let mut out = Vec::with_capacity(v.len());
    for x in v {
        if !x.is_integer() {
            return None;
        }
        out.push(x.to_integer());
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(coords: &[i64]) -> IntVector {
        IntVector::from_i64(coords)
    }

    #[test]
    fn determinants_match_cofactor_expansion() {
        let m = IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]);
        assert_eq!(m.det(), BigInt::from(16));
        let m = IntMatrix::from_rows(&[vec![2, 3, 1], vec![0, 1, 4], vec![5, 0, 2]]);
        // 2*(2-0) - 3*(0-20) + 1*(0-5) = 4 + 60 - 5
        assert_eq!(m.det(), BigInt::from(59));
        let singular = IntMatrix::from_rows(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(singular.det(), BigInt::zero());
    }

    #[test]
    fn adjugate_times_matrix_is_det_identity() {
        let m = IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]);
        let prod = m.adjugate().mul(&m);
        let det = m.det();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { det.clone() } else { BigInt::zero() };
                assert_eq!(*prod.entry(i, j), expect);
            }
        }
    }

    #[test]
    fn expansive_scalar_four_is_true() {
        assert!(is_expansive(&IntMatrix::from_rows(&[vec![4]])).unwrap());
    }

    #[test]
    fn expansive_rejects_unit_eigenvalue_exactly() {
        // Eigenvalue exactly 1 must be decided false, not indeterminate.
        let m = IntMatrix::from_rows(&[vec![1, 0], vec![0, 2]]);
        assert!(!is_expansive(&m).unwrap());
    }

    #[test]
    fn expansive_triangular_example_is_true() {
        let m = IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]);
        assert!(is_expansive(&m).unwrap());
    }

    #[test]
    fn expansive_rejects_rotation_and_small_determinant() {
        // Rotation by 90 degrees: all eigenvalues on the unit circle.
        let rot = IntMatrix::from_rows(&[vec![0, -1], vec![1, 0]]);
        assert!(!is_expansive(&rot).unwrap());
        // |det| = 1 companion matrix.
        let comp = IntMatrix::from_rows(&[vec![0, 1], vec![1, 1]]);
        assert!(!is_expansive(&comp).unwrap());
    }

    #[test]
    fn expansive_mixed_moduli_is_false() {
        // Companion of x^2 - 4x + 2: eigenvalues 2 +/- sqrt(2), one inside.
        let m = IntMatrix::from_rows(&[vec![0, -2], vec![1, 4]]);
        assert!(!is_expansive(&m).unwrap());
    }

    #[test]
    fn residue_scalar() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        assert_eq!(residue_class(&v(&[5]), &r), v(&[1]));
        assert_eq!(residue_class(&v(&[-1]), &r), v(&[3]));
    }

    #[test]
    fn residue_diagonal() {
        let r = IntMatrix::from_rows(&[vec![2, 0], vec![0, 2]]);
        assert_eq!(residue_class(&v(&[3, 1]), &r), v(&[1, 1]));
    }

    #[test]
    fn residue_triangular_derived_case() {
        // (4,1) = R * (1,0), so it reduces to the origin.
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]);
        assert_eq!(residue_class(&v(&[4, 1]), &r), v(&[0, 0]));
        // Oracle: enumerate R*k over a window and confirm membership directly.
        let hnf = Hnf::of_matrix(&r);
        let mut found = false;
        for k1 in -5..=5 {
            for k2 in -5..=5 {
                if r.apply(&v(&[k1, k2])) == v(&[4, 1]) {
                    found = true;
                }
            }
        }
        assert!(found);
        assert!(hnf.contains(&v(&[4, 1])));
    }

    #[test]
    fn simple_digit_sets() {
        let r4 = IntMatrix::from_rows(&[vec![4]]);
        assert!(is_simple_digit_set(&r4, &[v(&[0]), v(&[2])]));
        assert!(!is_simple_digit_set(&r4, &[v(&[0]), v(&[4])]));
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]);
        let b = [v(&[0, 0]), v(&[0, 3]), v(&[1, 0]), v(&[1, 3])];
        assert!(is_simple_digit_set(&r, &b));
    }

    #[test]
    fn invariant_lattice_scalar_two_digit() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let lat = invariant_lattice(&r, &[v(&[0]), v(&[2])]);
        assert_eq!(lat.rank, 1);
        assert!(!lat.equals_zd);
        assert_eq!(lat.hnf.basis, vec![v(&[2])]);
    }

    #[test]
    fn invariant_lattice_full_example() {
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]);
        let b = [v(&[0, 0]), v(&[0, 3]), v(&[1, 0]), v(&[1, 3])];
        let lat = invariant_lattice(&r, &b);
        assert!(lat.equals_zd);
    }

    #[test]
    fn invariant_lattice_standard_basis() {
        let r = IntMatrix::from_rows(&[vec![2, 0], vec![0, 2]]);
        let lat = invariant_lattice(&r, &[v(&[0, 0]), v(&[1, 0]), v(&[0, 1])]);
        assert!(lat.equals_zd);
    }

    #[test]
    fn invariant_lattice_is_r_invariant_and_contains_digits() {
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]);
        let b = [v(&[0, 0]), v(&[0, 3]), v(&[1, 0]), v(&[1, 3])];
        let lat = invariant_lattice(&r, &b);
        for col in &lat.hnf.basis {
            assert!(lat.hnf.contains(&r.apply(col)));
        }
        let b0 = &lat.translation;
        for digit in &b {
            assert!(lat.hnf.contains(&digit.sub(b0)));
        }
    }

    #[test]
    fn reduce_pair_identity_branch() {
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]);
        let b = vec![v(&[0, 0]), v(&[0, 3]), v(&[1, 0]), v(&[1, 3])];
        let red = reduce_pair(&r, &b).unwrap();
        assert!(red.m.is_identity());
        assert_eq!(red.rank, 2);
        assert_eq!(red.b, b);
    }

    #[test]
    fn reduce_pair_rescales_scalar_lattice() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let red = reduce_pair(&r, &[v(&[0]), v(&[2])]).unwrap();
        assert_eq!(red.r, IntMatrix::from_rows(&[vec![4]]));
        assert_eq!(red.b, vec![v(&[0]), v(&[1])]);
        assert_eq!(red.m, IntMatrix::from_rows(&[vec![2]]));
        // Round trip: M * b_tilde = b - b0, M^-1 R M = R~.
        for (orig, reduced) in [v(&[0]), v(&[2])].iter().zip(&red.b) {
            assert_eq!(red.m.apply(reduced), orig.sub(&red.translation));
        }
        // The reduced pair now spans all of Z.
        let lat = invariant_lattice(&red.r, &red.b);
        assert!(lat.equals_zd);
    }

    #[test]
    fn reduce_pair_drops_dimension() {
        let r = IntMatrix::from_rows(&[vec![2, 0], vec![0, 3]]);
        let red = reduce_pair(&r, &[v(&[0, 0]), v(&[1, 0])]).unwrap();
        assert_eq!(red.rank, 1);
        assert_eq!(red.r, IntMatrix::from_rows(&[vec![2]]));
        assert_eq!(red.b, vec![v(&[0]), v(&[1])]);
    }

    #[test]
    fn reduce_pair_rejects_collisions() {
        let r = IntMatrix::from_rows(&[vec![4]]);
        let err = reduce_pair(&r, &[v(&[0]), v(&[4])]).unwrap_err();
        assert!(matches!(err, Error::NotSimpleDigitSet { .. }));
    }

    #[test]
    fn hnf_is_canonical_under_generator_shuffles() {
        let gens1 = [v(&[2, 0]), v(&[0, 3]), v(&[2, 3])];
        let gens2 = [v(&[2, 3]), v(&[2, 0]), v(&[4, 3])];
        let h1 = Hnf::of_generators(2, &gens1);
        let h2 = Hnf::of_generators(2, &gens2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn residue_count_matches_determinant() {
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]);
        let hnf = Hnf::of_matrix(&r);
        let mut reps = std::collections::HashSet::new();
        for x in -8..8 {
            for y in -8..8 {
                reps.insert(hnf.reduce(&v(&[x, y])).coords);
            }
        }
        assert_eq!(BigInt::from(reps.len() as u64), BigInt::from(r.det().magnitude().clone()));
    }

    #[test]
    fn residue_enumeration_is_complete_sorted_and_reduce_fixed() {
        let r = IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]);
        let hnf = Hnf::of_matrix(&r);
        let pool = hnf.residues(1 << 10).unwrap();
        assert_eq!(pool.len(), 8);
        let mut sorted = pool.clone();
        sorted.sort();
        assert_eq!(pool, sorted);
        for p in &pool {
            assert_eq!(hnf.reduce(p), *p, "representative must be canonical");
        }
        // Completeness: every vector in a window reduces into the pool.
        for x in -8..8 {
            for y in -8..8 {
                assert!(pool.contains(&hnf.reduce(&v(&[x, y]))));
            }
        }
    }

    #[test]
    fn residue_enumeration_respects_the_budget() {
        let r = IntMatrix::from_rows(&[vec![100, 0], vec![0, 100]]);
        let hnf = Hnf::of_matrix(&r);
        assert!(matches!(
            hnf.residues(100),
            Err(Error::BudgetExceeded { needed: 10_000, cap: 100 })
        ));
    }
}
