//! Dense Hermitian eigenvalue helpers used by the frame and search routines,
//! plus the exact phase reduction shared by every unit-modulus matrix builder.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

/// Reduces the exact fraction `num/den` modulo 1 into (-1/2, 1/2] and returns
/// it as a float.
///
/// Phases of unit-modulus matrix entries are reduced this way before
/// exponentiation, so the only floating-point error in an entry is the final
/// division and the trig evaluation; the integer part of the phase never
/// contaminates the result no matter how large the inputs grow.
pub fn centered_unit_fraction(num: &BigInt, den: &BigInt) -> f64 {
    assert!(!den.is_zero(), "denominator must be nonzero");
    let (num, den) = if den.is_negative() {
        (-num.clone(), -den.clone())
    } else {
        (num.clone(), den.clone())
    };
    let mut r = num.mod_floor(&den);
    if &r * 2 > den {
        r -= &den;
    }
    r.to_f64().expect("reduced numerator fits in f64") / den.to_f64().expect("denominator fits in f64")
}

/// Eigenvalues of a Hermitian complex matrix, sorted ascending.
///
/// Works through the real embedding [[Re, -Im], [Im, Re]], whose spectrum is
/// the spectrum of the complex matrix with every eigenvalue doubled; adjacent
/// pairs of the sorted embedded spectrum are averaged to undo the doubling.
pub fn hermitian_eigenvalues(g: &DMatrix<Complex<f64>>) -> Vec<f64> {
    let m = g.nrows();
    assert_eq!(m, g.ncols(), "matrix must be square");
    if m == 0 {
        return Vec::new();
    }
    let mut em = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = g[(i, j)];
            em[(i, j)] = z.re;
            em[(i + m, j + m)] = z.re;
            em[(i, j + m)] = -z.im;
            em[(i + m, j)] = z.im;
        }
    }
    let eig = em.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0..m).map(|i| 0.5 * (vals[2 * i] + vals[2 * i + 1])).collect()
}

/// Maximum dimension the allocation-free Jacobi solver accepts.
pub const JACOBI_MAX: usize = 16;

/// Eigenvalues of a small Hermitian matrix (dimension <= [`JACOBI_MAX`]),
/// sorted ascending, computed by cyclic Jacobi rotations on stack buffers.
///
/// This is the hot path of the subset searches: it avoids per-call heap
/// allocation and is deterministic (fixed sweep order, fixed iteration count
/// criterion), so repeated runs produce bit-identical scores.
pub fn hermitian_eigenvalues_small(m: usize, a: &[Complex<f64>]) -> Vec<f64> {
    assert!(m <= JACOBI_MAX, "matrix too large for the small solver");
    assert!(a.len() >= m * m);
    let mut w = [Complex::new(0.0, 0.0); JACOBI_MAX * JACOBI_MAX];
    w[..m * m].copy_from_slice(&a[..m * m]);

    // Cyclic Jacobi: annihilate w[p*m+q] with a unitary rotation of rows and
    // columns p, q. Quadratic convergence makes a fixed sweep cap safe.
    for _sweep in 0..30 {
        let mut off = 0.0f64;
        for p in 0..m {
            for q in (p + 1)..m {
                off += w[p * m + q].norm_sqr();
            }
        }
        if off <= 1e-30 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = w[p * m + q];
                let napq = apq.norm();
                if napq <= 1e-300 {
                    continue;
                }
                let app = w[p * m + p].re;
                let aqq = w[q * m + q].re;
                // Diagonalize the 2x2 Hermitian block [[app, apq], [conj(apq), aqq]].
                let theta = (aqq - app) / (2.0 * napq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_mag = t * c;
                // Phase so the rotation stays unitary for a complex off-diagonal.
                let phase = apq / napq;
                let s = phase * s_mag;

                for k in 0..m {
                    let akp = w[k * m + p];
                    let akq = w[k * m + q];
                    w[k * m + p] = akp * c - akq * s.conj();
                    w[k * m + q] = akp * s + akq * c;
                }
                for k in 0..m {
                    let apk = w[p * m + k];
                    let aqk = w[q * m + k];
                    w[p * m + k] = apk * c - aqk * s;
                    w[q * m + k] = apk * s.conj() + aqk * c;
                }
                w[p * m + q] = Complex::new(0.0, 0.0);
                w[q * m + p] = Complex::new(0.0, 0.0);
            }
        }
    }
    let mut vals: Vec<f64> = (0..m).map(|i| w[i * m + i].re).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_hermitian(m: usize) -> DMatrix<Complex<f64>> {
        // Deterministic Hermitian test matrix with non-trivial imaginary parts.
        let mut g = DMatrix::<Complex<f64>>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let re = ((i * 7 + j * 3) % 11) as f64 / 11.0;
                let im = if i == j { 0.0 } else { ((i * 5 + j) % 7) as f64 / 7.0 };
                if i <= j {
                    g[(i, j)] = Complex::new(re, im);
                    g[(j, i)] = Complex::new(re, -im);
                }
            }
            g[(i, i)] += Complex::new(m as f64, 0.0);
        }
        g
    }

    #[test]
    fn embedding_and_jacobi_agree() {
        for m in 1..=8 {
            let g = example_hermitian(m);
            let a: Vec<Complex<f64>> = g.transpose().iter().copied().collect(); // row-major
            let e1 = hermitian_eigenvalues(&g);
            let e2 = hermitian_eigenvalues_small(m, &a);
            for (x, y) in e1.iter().zip(e2.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn identity_spectrum_is_ones() {
        let g = DMatrix::<Complex<f64>>::identity(5, 5);
        for v in hermitian_eigenvalues(&g) {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn trace_is_preserved() {
        let g = example_hermitian(6);
        let tr: f64 = (0..6).map(|i| g[(i, i)].re).sum();
        let sum: f64 = hermitian_eigenvalues(&g).iter().sum();
        assert_abs_diff_eq!(tr, sum, epsilon = 1e-9);
    }

    #[test]
    fn centered_fraction_reduces_into_half_open_interval() {
        let cases: [(i64, i64, f64); 8] = [
            (0, 4, 0.0),
            (1, 4, 0.25),
            (2, 4, 0.5),
            (3, 4, -0.25),
            (-1, 4, -0.25),
            (7, 4, -0.25),
            (5, -2, 0.5),
            (1_000_003, 1_000_000, 3e-6),
        ];
        for (n, d, want) in cases {
            let got = centered_unit_fraction(&BigInt::from(n), &BigInt::from(d));
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
            assert!(got > -0.5 - 1e-15 && got <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn centered_fraction_huge_phase_keeps_full_precision() {
        // 10^30 + 1 thirds: the integer part is astronomically large, but the
        // reduced value must still be exactly 1/3 (10^30 is divisible by 3?
        // no: 10^30 mod 3 = 1, so (10^30 + 1) mod 3 = 2, centered to -1/3).
        let n: BigInt = BigInt::from(10u8).pow(30) + 1;
        let got = centered_unit_fraction(&n, &BigInt::from(3));
        assert_abs_diff_eq!(got, -1.0 / 3.0, epsilon = 1e-16);
    }
}
