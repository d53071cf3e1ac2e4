//! Acceptance suite: twelve end-to-end criteria covering triple verification,
//! product towers, certified frame bounds, zero-set reproduction, packing
//! completeness, separation, subset searches, concatenation, step-function
//! energies, the lattice layer, and agreement with independent oracles.
//!
//! Each test prints one `criterion N: PASS/FAIL` line (visible with
//! `--nocapture`); failures also panic with the same message.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use affine_spectra_core::digits::dual_expand;
use affine_spectra_core::fourier::{mask_eval, z_set_scan, zero_membership_exact, FourierEvaluator};
use affine_spectra_core::frames::{
    concatenation_bounds, exhaustive_subset_search, frame_bounds, greedy_subset_search,
    step_basis_gram_spectrum, step_frame_check, tower_frame_bounds,
};
use affine_spectra_core::hadamard::{verify_triple, HadamardTriple, VerifyOutcome};
use affine_spectra_core::lattice::{
    invariant_lattice, reduce_pair, residue_class, Hnf, IntMatrix, IntVector,
};
use affine_spectra_core::spectra::{build_lambda, delta_lambda, jp_check, SpectrumPlan, Stage};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;

const CAP: u128 = 1 << 20;

// ---------------------------------------------------------------------------
// Harness: one labelled pass/fail line per criterion.
// ---------------------------------------------------------------------------

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(summary) => println!("criterion {n} ({name}): PASS — {summary}"),
        Err(why) => {
            println!("criterion {n} ({name}): FAIL — {why}");
            panic!("criterion {n} ({name}): FAIL — {why}");
        }
    }
}

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn lib<T>(r: affine_spectra_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

// ---------------------------------------------------------------------------
// Fixture data (kept local so the suite stands on its own).
// ---------------------------------------------------------------------------

fn iv(coords: &[i64]) -> IntVector {
    IntVector::from_i64(coords)
}

fn ivs(rows: &[&[i64]]) -> Vec<IntVector> {
    rows.iter().map(|r| iv(r)).collect()
}

type TripleData = (IntMatrix, Vec<IntVector>, Vec<IntVector>);

fn quarter() -> TripleData {
    (IntMatrix::from_rows(&[vec![4]]), ivs(&[&[0], &[2]]), ivs(&[&[0], &[1]]))
}

fn third() -> (IntMatrix, Vec<IntVector>) {
    (IntMatrix::from_rows(&[vec![3]]), ivs(&[&[0], &[2]]))
}

fn planar_upper() -> TripleData {
    (
        IntMatrix::from_rows(&[vec![4, 0], vec![1, 4]]),
        ivs(&[&[0, 0], &[0, 3], &[1, 0], &[1, 3]]),
        ivs(&[&[0, 0], &[2, 0], &[0, 2], &[2, 2]]),
    )
}

fn planar_mixed() -> TripleData {
    (
        IntMatrix::from_rows(&[vec![4, 0], vec![1, 2]]),
        ivs(&[&[0, 0], &[0, 3], &[1, 0], &[1, 3]]),
        ivs(&[&[0, 0], &[2, 0], &[0, 1], &[2, 1]]),
    )
}

fn gasket() -> TripleData {
    (
        IntMatrix::from_rows(&[vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]),
        ivs(&[&[0, 0, 0], &[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]),
        ivs(&[&[0, 0, 0], &[1, 0, 1], &[0, 1, 1], &[1, 1, 0]]),
    )
}

fn verified_presets() -> Result<Vec<(&'static str, HadamardTriple)>, String> {
    let mut out = Vec::new();
    for (name, (r, b, l)) in [
        ("quarter_cantor", quarter()),
        ("ex_4_0_1_4", planar_upper()),
        ("ex_4_0_1_2", planar_mixed()),
        ("gasket_d3", gasket()),
    ] {
        match lib(verify_triple(&r, &b, &l, 1e-12))? {
            VerifyOutcome::Accepted(triple) => out.push((name, triple)),
            VerifyOutcome::Rejected { deviation, .. } => {
                return Err(format!("{name} rejected with deviation {deviation:.3e}"))
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Small self-contained numeric helpers for the independent oracles.
// ---------------------------------------------------------------------------

/// xorshift64*: deterministic, dependency-free randomness for the suite.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Rng {
        Rng(seed | 1)
    }
    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next_u64() % ((hi - lo + 1) as u64)) as i64
    }
}

#[derive(Clone, Copy)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    const ONE: C64 = C64 { re: 1.0, im: 0.0 };
    fn unit(turns: f64) -> C64 {
        let frac = turns - turns.floor();
        C64 { re: (TAU * frac).cos(), im: (TAU * frac).sin() }
    }
    fn mul(self, o: C64) -> C64 {
        C64 { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
    fn add(self, o: C64) -> C64 {
        C64 { re: self.re + o.re, im: self.im + o.im }
    }
    fn scale(self, s: f64) -> C64 {
        C64 { re: self.re * s, im: self.im * s }
    }
    fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_triple_verification() {
    criterion(1, "triple verification", || {
        let mut worst = 0.0f64;
        for (name, (r, b, l)) in [
            ("quarter_cantor", quarter()),
            ("ex_4_0_1_4", planar_upper()),
            ("ex_4_0_1_2", planar_mixed()),
            ("gasket_d3", gasket()),
        ] {
            let t0 = Instant::now();
            let outcome = lib(verify_triple(&r, &b, &l, 1e-12))?;
            let elapsed = t0.elapsed();
            let triple = match outcome {
                VerifyOutcome::Accepted(triple) => triple,
                VerifyOutcome::Rejected { deviation, .. } => {
                    return Err(format!("{name} rejected (deviation {deviation:.3e})"))
                }
            };
            check!(
                triple.deviation < 1e-12,
                "{name}: deviation {} is not below 1e-12",
                triple.deviation
            );
            check!(
                elapsed < Duration::from_secs(1),
                "{name}: verification took {elapsed:?} (budget 1 s)"
            );
            worst = worst.max(triple.deviation);
        }

        let r = IntMatrix::from_rows(&[vec![4]]);
        match lib(verify_triple(&r, &ivs(&[&[0], &[2]]), &ivs(&[&[0], &[2]]), 1e-12))? {
            VerifyOutcome::Rejected { deviation, .. } => {
                check!(deviation > 1.0, "broken pair deviation {deviation} should be large");
            }
            VerifyOutcome::Accepted(_) => {
                return Err("broken pair (R=4, B={0,2}, L={0,2}) was accepted".into())
            }
        }
        Ok(format!("four presets accepted (worst deviation {worst:.2e}), broken pair rejected"))
    });
}

#[test]
fn criterion_02_product_towers() {
    criterion(2, "product towers", || {
        let t0 = Instant::now();
        let mut worst = 0.0f64;

        let (r, b, l) = quarter();
        let base = match lib(verify_triple(&r, &b, &l, 1e-12))? {
            VerifyOutcome::Accepted(t) => t,
            VerifyOutcome::Rejected { .. } => return Err("quarter pair rejected".into()),
        };
        for k in 1..=6 {
            let lifted = lib(affine_spectra_core::hadamard::product_triple(&base, k, 1e-10, CAP))?;
            check!(
                lifted.deviation < 1e-10,
                "quarter product level {k}: deviation {}",
                lifted.deviation
            );
            worst = worst.max(lifted.deviation);
        }

        let (r, b, l) = planar_upper();
        let base = match lib(verify_triple(&r, &b, &l, 1e-12))? {
            VerifyOutcome::Accepted(t) => t,
            VerifyOutcome::Rejected { .. } => return Err("planar pair rejected".into()),
        };
        for k in 1..=3 {
            let lifted = lib(affine_spectra_core::hadamard::product_triple(&base, k, 1e-10, CAP))?;
            check!(
                lifted.deviation < 1e-10,
                "planar product level {k}: deviation {}",
                lifted.deviation
            );
            worst = worst.max(lifted.deviation);
        }

        let elapsed = t0.elapsed();
        check!(elapsed < Duration::from_secs(30), "towers took {elapsed:?} (budget 30 s)");
        Ok(format!(
            "quarter levels 1-6 and planar levels 1-3 stay unitary (worst deviation {worst:.2e}, {:.1?})",
            elapsed
        ))
    });
}

#[test]
fn criterion_03_near_parseval_tower_bounds() {
    criterion(3, "near-Parseval tower bounds", || {
        let mut checked = 0u32;
        for (name, triple) in verified_presets()? {
            let n_cap = {
                let big_n = triple.b.len() as u128;
                let mut n = 0u32;
                while big_n.pow(n + 1) <= 4096 {
                    n += 1;
                }
                n
            };
            for n in 1..=n_cap {
                let cert = lib(tower_frame_bounds(&triple, n, 4096))?;
                check!(
                    cert.report.sigma2_min >= 1.0 - 1e-10 && cert.report.sigma2_max <= 1.0 + 1e-10,
                    "{name} depth {n}: bounds [{}, {}] leave [1-1e-10, 1+1e-10]",
                    cert.report.sigma2_min,
                    cert.report.sigma2_max
                );
                checked += 1;
            }
        }
        Ok(format!("{checked} tower certificates all inside [1-1e-10, 1+1e-10]"))
    });
}

#[test]
fn criterion_04_periodic_zero_set() {
    criterion(4, "periodic zero set reproduction", || {
        let (r, b, _) = planar_mixed();
        let eval = lib(FourierEvaluator::new(&r, &b))?;
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for m in -10i64..=10 {
            for n in -10i64..=10 {
                let xi_exact = vec![
                    BigRational::from_integer(BigInt::from(m)),
                    BigRational::new(BigInt::from(3 * n + 1), BigInt::from(3)),
                ];
                let hit = lib(zero_membership_exact(&r, &b, &xi_exact, 12))?;
                check!(hit, "({m}, 1/3{n:+}) missed the exact zero test");
                let value = eval.mu_hat(&[m as f64, n as f64 + 1.0 / 3.0], 1e-9).norm();
                check!(value < 1e-8, "|mu_hat({m}, 1/3{n:+})| = {value:.3e} is not below 1e-8");
                worst = worst.max(value);
            }
        }
        let elapsed = t0.elapsed();
        check!(elapsed < Duration::from_secs(60), "grid took {elapsed:?} (budget 1 min)");

        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_affine-spectra"))
            .args([
                "zero-scan",
                "--preset",
                "ex_4_0_1_2",
                "--grid",
                "64",
                "--window",
                "8",
                "--out",
            ])
            .arg(tmp.path())
            .output()
            .map_err(|e| e.to_string())?;
        check!(
            out.status.code() == Some(1),
            "zero-scan exit code {:?}, expected 1",
            out.status.code()
        );
        let stdout = String::from_utf8_lossy(&out.stdout);
        check!(stdout.contains("(0, 1/3)"), "obstruction point missing from: {stdout}");
        Ok(format!(
            "441 exact zeros confirmed (max |mu_hat| {worst:.2e}); zero-scan exits 1 at (0, 1/3)"
        ))
    });
}

#[test]
fn criterion_05_zero_free_scan() {
    criterion(5, "zero-free scan evidence", || {
        let t0 = Instant::now();
        let mut minima = Vec::new();
        let quarter_rb = {
            let (r, b, _) = quarter();
            (r, b)
        };
        let planar_rb = {
            let (r, b, _) = planar_upper();
            (r, b)
        };
        for (name, (r, b)) in [("quarter_cantor", quarter_rb), ("ex_4_0_1_4", planar_rb)] {
            let report = lib(z_set_scan(&r, &b, 64, 8, 1e-2, 12, 1 << 22))?;
            check!(report.obstruction.is_none(), "{name}: unexpected obstruction");
            check!(
                report.min_max_abs > 1e-2,
                "{name}: scan minimum {} is not above 1e-2",
                report.min_max_abs
            );
            minima.push(format!("{name} {:.3}", report.min_max_abs));
        }
        let elapsed = t0.elapsed();
        check!(elapsed < Duration::from_secs(120), "scans took {elapsed:?} (budget 2 min)");
        Ok(format!("no obstruction at grid 1/64, window 8; minima: {}", minima.join(", ")))
    });
}

#[test]
fn criterion_06_packing_completeness() {
    criterion(6, "packing completeness", || {
        let (r, b, l) = quarter();
        let grid: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64 / 16.0]).collect();

        let mut prev: Option<Vec<f64>> = None;
        let mut q12 = Vec::new();
        for k in 1..=12usize {
            let plan = lib(SpectrumPlan::uniform(r.clone(), b.clone(), &l, k))?;
            let lambda = lib(build_lambda(&plan, k, CAP))?;
            let report = lib(jp_check(&r, &b, &lambda, &grid, 1e-12))?;
            for (i, q) in report.q_values.iter().enumerate() {
                check!(*q <= 1.0 + 1e-9, "Q_{k}({}) = {q} exceeds 1+1e-9", i as f64 / 16.0);
                if let Some(prev) = &prev {
                    check!(
                        *q >= prev[i] - 1e-12,
                        "Q dropped from {} to {q} at K={k}, grid point {i}",
                        prev[i]
                    );
                }
            }
            prev = Some(report.q_values.clone());
            if k == 12 {
                q12 = report.q_values;
            }
        }
        let q12_min = q12.iter().cloned().fold(f64::INFINITY, f64::min);
        check!(q12_min >= 0.99, "min Q_12 = {q12_min} is below 0.99");

        // Independent oracle: K = 16, fixed depth-20 mask products, no shared
        // code with the library evaluator.
        let mask = |eta: f64| -> C64 {
            // (1 + exp(-2 pi i * 2 eta)) / 2 for digits {0, 2}.
            C64::ONE.add(C64::unit(-2.0 * eta)).scale(0.5)
        };
        let mu_oracle = |x: f64| -> C64 {
            let mut value = C64::ONE;
            let mut arg = x;
            for _ in 0..20 {
                arg /= 4.0;
                value = value.mul(mask(arg));
            }
            value
        };
        let mut oracle_min = f64::INFINITY;
        for i in 0..16u32 {
            let xi = i as f64 / 16.0;
            let mut q = 0.0;
            for w in 0..1u64 << 16 {
                let mut lambda = 0u64;
                for j in 0..16 {
                    if w >> j & 1 == 1 {
                        lambda += 1 << (2 * j);
                    }
                }
                q += mu_oracle(xi + lambda as f64).norm_sqr();
            }
            check!(q <= 1.02, "oracle Q_16({xi}) = {q} is implausibly large");
            oracle_min = oracle_min.min(q);
        }
        check!(
            oracle_min >= 0.99,
            "oracle Q_16 minimum {oracle_min} does not confirm the 0.99 threshold"
        );
        Ok(format!(
            "Q_K monotone and <= 1+1e-9 for K=1..12; min Q_12 = {q12_min:.7}; oracle min Q_16 = {oracle_min:.7}"
        ))
    });
}

#[test]
fn criterion_07_separation_stability() {
    criterion(7, "separation stability", || {
        let (r, b, l) = quarter();
        let mut rendered: Vec<String> = Vec::new();
        for k in 6..=12usize {
            let plan = lib(SpectrumPlan::uniform(r.clone(), b.clone(), &l, k))?;
            let report = lib(delta_lambda(&plan, k, 1e-12, CAP))?;
            check!(report.delta > 0.0, "delta_{k} = {} is not positive", report.delta);
            rendered.push(format!("{:.2e}", report.delta));
        }
        let all_equal = rendered.windows(2).all(|w| w[0] == w[1]);
        check!(
            all_equal,
            "delta is not stable to 3 significant digits over K=6..12: {rendered:?}"
        );

        // A plan whose level-1 frequency 4 maps to the exact transform zero at
        // 1 must report zero separation, exactly.
        let stages = vec![Stage::uncorrected(1, ivs(&[&[0], &[4]]))];
        let plan = SpectrumPlan::new_unchecked(r, b, stages);
        let report = lib(delta_lambda(&plan, 1, 1e-12, CAP))?;
        check!(report.delta == 0.0, "zero-hitting plan reported delta = {}", report.delta);
        Ok(format!("delta stable at {} for K=6..12; zero-hitting plan reports exactly 0", rendered[0]))
    });
}

#[test]
fn criterion_08_subset_search() {
    criterion(8, "subset search optimality", || {
        let t0 = Instant::now();
        let (r, b) = third();

        // Depth 1: compare against a closed-form 2x2 oracle. The Gram of rows
        // {p, q} has unit diagonal and off-diagonal of modulus
        // |(1 + exp(-2 pi i * 2(q-p)/3)) / 2|, so the least eigenvalue is
        // 1 - |offdiag|.
        let pool1 = lib(Hnf::of_matrix(&r.transpose()).residues(CAP))?;
        let mut oracle_best = f64::NEG_INFINITY;
        for p in 0..pool1.len() {
            for q in (p + 1)..pool1.len() {
                let delta = (q - p) as f64;
                let off = C64::ONE.add(C64::unit(-2.0 * delta / 3.0)).scale(0.5);
                oracle_best = oracle_best.max(1.0 - off.norm());
            }
        }
        let found1 = lib(exhaustive_subset_search(&r, &b, 1, &pool1, 2, 5_000_000))?;
        check!(
            (oracle_best - 0.5).abs() < 1e-12,
            "depth-1 oracle optimum {oracle_best} is not 1/2"
        );
        check!(
            (found1.sigma2_min - 0.5).abs() < 1e-12,
            "depth-1 search found {} instead of 1/2",
            found1.sigma2_min
        );

        // Depth 2 (126 subsets) and depth 3 (2,220,075 subsets): the search
        // must be bit-reproducible run to run.
        let pool2 = lib(Hnf::of_matrix(&r.transpose().pow(2)).residues(CAP))?;
        let first2 = lib(exhaustive_subset_search(&r, &b, 2, &pool2, 4, 5_000_000))?;
        let second2 = lib(exhaustive_subset_search(&r, &b, 2, &pool2, 4, 5_000_000))?;
        check!(
            first2.j_set == second2.j_set
                && first2.sigma2_min.to_bits() == second2.sigma2_min.to_bits()
                && first2.sigma2_max.to_bits() == second2.sigma2_max.to_bits(),
            "depth-2 exhaustive search is not reproducible"
        );

        let pool3 = lib(Hnf::of_matrix(&r.transpose().pow(3)).residues(CAP))?;
        let first3 = lib(exhaustive_subset_search(&r, &b, 3, &pool3, 8, 5_000_000))?;
        let second3 = lib(exhaustive_subset_search(&r, &b, 3, &pool3, 8, 5_000_000))?;
        check!(
            first3.j_set == second3.j_set
                && first3.sigma2_min.to_bits() == second3.sigma2_min.to_bits()
                && first3.sigma2_max.to_bits() == second3.sigma2_max.to_bits(),
            "depth-3 exhaustive search is not reproducible"
        );

        let greedy2 = lib(greedy_subset_search(&r, &b, 2, &pool2, 4, 0, 8))?;
        check!(
            greedy2.sigma2_min >= 0.9 * first2.sigma2_min,
            "greedy depth-2 bound {} is below 90% of exhaustive {}",
            greedy2.sigma2_min,
            first2.sigma2_min
        );

        let elapsed = t0.elapsed();
        check!(elapsed < Duration::from_secs(300), "searches took {elapsed:?} (budget 5 min)");
        Ok(format!(
            "depth-1 optimum 1/2 matches the closed form; depths 2-3 reproducible (best {} / {}); greedy within 10% ({:.1?})",
            first2.sigma2_min, first3.sigma2_min, elapsed
        ))
    });
}

#[test]
fn criterion_09_stage_concatenation() {
    criterion(9, "stage concatenation bounds", || {
        let (r, b) = third();
        let stage_sets: Vec<Vec<IntVector>> =
            vec![ivs(&[&[0], &[1]]), ivs(&[&[0], &[2]]), ivs(&[&[1], &[2]])];
        let mut reports = Vec::new();
        for j in &stage_sets {
            reports.push(lib(frame_bounds(&r, &b, 1, j, CAP))?);
        }
        let mut tested = 0u32;
        for (i, first) in stage_sets.iter().enumerate() {
            for (j, second) in stage_sets.iter().enumerate() {
                let three = BigInt::from(3);
                let combined: Vec<IntVector> = first
                    .iter()
                    .flat_map(|u| second.iter().map(|v| u.add(&v.scale(&three))))
                    .collect();
                let empirical = lib(frame_bounds(&r, &b, 2, &combined, CAP))?;
                let eps = [reports[i].epsilon, reports[j].epsilon];
                let (lo, hi) = lib(concatenation_bounds(&eps))?;
                check!(
                    empirical.sigma2_min >= lo - 1e-12,
                    "stages {i}+{j}: lower bound {} fell below {lo}",
                    empirical.sigma2_min
                );
                check!(
                    empirical.sigma2_max <= hi + 1e-12,
                    "stages {i}+{j}: upper bound {} exceeded {hi}",
                    empirical.sigma2_max
                );
                tested += 1;
            }
        }
        Ok(format!("{tested} two-stage systems inside their per-stage product enclosures"))
    });
}

#[test]
fn criterion_10_step_function_frames() {
    criterion(10, "step-function frame inequality", || {
        let (r, b, l) = quarter();
        let plan = lib(SpectrumPlan::uniform(r.clone(), b.clone(), &l, 12))?;
        let lambda = lib(build_lambda(&plan, 12, CAP))?;
        let report = lib(step_frame_check(&r, &b, &lambda, 4, 12, 100, 0, 1e-12, CAP))?;
        check!(
            report.min_ratio >= 0.98,
            "least energy ratio {} is below 0.98",
            report.min_ratio
        );
        check!(
            report.max_ratio <= 1.0 + 1e-6,
            "greatest energy ratio {} exceeds 1+1e-6",
            report.max_ratio
        );

        // Basis bridge: per-frequency coefficients of the level-4 basis step
        // functions must reproduce the dense Gram spectrum.
        for j in [
            dual_expand(&r, &l, 4, CAP).map_err(|e| e.to_string())?.elements,
            ivs(&[&[0], &[1], &[4], &[5], &[16], &[17], &[20], &[22]]),
        ] {
            let dense = lib(frame_bounds(&r, &b, 4, &j, CAP))?;
            let spectrum = lib(step_basis_gram_spectrum(&r, &b, &j, 4, 1e-12, CAP))?;
            let lo = spectrum.first().copied().unwrap_or(f64::NAN);
            let hi = spectrum.last().copied().unwrap_or(f64::NAN);
            check!(
                (lo - dense.sigma2_min).abs() < 1e-8 && (hi - dense.sigma2_max).abs() < 1e-8,
                "step-basis spectrum [{lo}, {hi}] differs from dense [{}, {}]",
                dense.sigma2_min,
                dense.sigma2_max
            );
        }
        Ok(format!(
            "100 level-4 step functions give ratios in [{:.5}, {:.9}]; basis spectra match the dense Gram",
            report.min_ratio, report.max_ratio
        ))
    });
}

#[test]
fn criterion_11_lattice_layer() {
    criterion(11, "lattice layer exactness", || {
        let (r, b, _) = planar_upper();
        let lat = invariant_lattice(&r, &b);
        check!(
            lat.equals_zd && lat.full_rank && lat.rank == 2,
            "invariant lattice of the planar pair is not the standard lattice"
        );

        let r1 = IntMatrix::from_rows(&[vec![4]]);
        let b1 = ivs(&[&[0], &[2]]);
        let reduced = lib(reduce_pair(&r1, &b1))?;
        check!(
            reduced.r == IntMatrix::from_rows(&[vec![4]])
                && reduced.b == ivs(&[&[0], &[1]])
                && reduced.m == IntMatrix::from_rows(&[vec![2]]),
            "reduce_pair(4, {{0,2}}) did not return (4, {{0,1}}, M=2)"
        );
        check!(
            reduced.m.mul(&reduced.r) == r1.mul(&reduced.m),
            "round-trip M r' = R M is not exact"
        );
        for (orig, red) in b1.iter().zip(&reduced.b) {
            check!(
                reduced.m.apply(red) == orig.sub(&reduced.translation),
                "round-trip M b' = b - b0 is not exact"
            );
        }

        // Randomized property block: 10^4 cases across dimensions 1 and 2.
        let mut rng = Rng::new(0xACCE55);
        let two = BigUint::from(2u32);
        let mut cases = 0u32;
        while cases < 10_000 {
            let d = 1 + (rng.next_u64() % 2) as usize;
            let rows: Vec<Vec<i64>> = (0..d)
                .map(|_| (0..d).map(|_| rng.range_i64(-5, 5)).collect())
                .collect();
            let m = IntMatrix::from_rows(&rows);
            if m.det().magnitude() < &two {
                continue;
            }
            let hnf = Hnf::of_matrix(&m);
            let v = iv(&(0..d).map(|_| rng.range_i64(-20, 20)).collect::<Vec<_>>());
            let w = iv(&(0..d).map(|_| rng.range_i64(-20, 20)).collect::<Vec<_>>());

            // Coset invariance of the canonical residue.
            let shifted = v.add(&m.apply(&w));
            check!(
                residue_class(&v, &m) == residue_class(&shifted, &m),
                "case {cases}: residue changed along the lattice"
            );
            // Idempotent reduction staying in the coset.
            let red = hnf.reduce(&v);
            check!(hnf.reduce(&red) == red, "case {cases}: reduction not idempotent");
            check!(hnf.contains(&red.sub(&v)), "case {cases}: reduction left the coset");
            // Dilation-invariance of the digit lattice.
            let digits = vec![IntVector::zero(d), v.clone()];
            let lat = invariant_lattice(&m, &digits);
            check!(
                lat.hnf.contains(&v) && lat.hnf.contains(&m.apply(&v)),
                "case {cases}: invariant lattice is not dilation-stable"
            );
            // Residue counting matches the covolume.
            let pool = lib(hnf.residues(1 << 16))?;
            check!(
                BigUint::from(pool.len()) == m.det().magnitude().clone(),
                "case {cases}: residue count {} differs from |det| {}",
                pool.len(),
                m.det()
            );
            cases += 1;
        }
        Ok(format!(
            "planar invariant lattice is standard; (4, {{0,2}}) reduces exactly; {cases} randomized cases hold"
        ))
    });
}

/// Cylinder-midpoint Riemann sum for the invariant measure's transform,
/// written against f64 tables only (no shared code with the library
/// evaluator). `rinv` is the inverse dilation, `centroid` the exact measure
/// barycentre, and the quadrature walks all `N^depth` cylinder words.
struct RiemannOracle {
    points: Vec<Vec<f64>>,
}

impl RiemannOracle {
    fn build(rinv: &[Vec<f64>], digits: &[Vec<f64>], centroid: &[f64], depth: u32) -> RiemannOracle {
        let d = centroid.len();
        let apply = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
            (0..d).map(|i| (0..d).map(|j| m[i][j] * v[j]).sum()).collect()
        };
        // tables[j][digit] = R^{-(j+1)} b_digit, and shift = R^{-depth} m.
        let mut tables: Vec<Vec<Vec<f64>>> = Vec::with_capacity(depth as usize);
        let mut scaled: Vec<Vec<f64>> = digits.to_vec();
        for _ in 0..depth {
            scaled = scaled.iter().map(|b| apply(rinv, b)).collect();
            tables.push(scaled.clone());
        }
        let mut shift = centroid.to_vec();
        for _ in 0..depth {
            shift = apply(rinv, &shift);
        }
        let n = digits.len();
        let total = n.pow(depth);
        let mut points = Vec::with_capacity(total);
        for idx in 0..total {
            let mut x = shift.clone();
            let mut rest = idx;
            for table in &tables {
                let digit = rest % n;
                rest /= n;
                for (xi, ti) in x.iter_mut().zip(&table[digit]) {
                    *xi += ti;
                }
            }
            points.push(x);
        }
        RiemannOracle { points }
    }

    fn transform(&self, xi: &[f64]) -> C64 {
        let mut acc = C64 { re: 0.0, im: 0.0 };
        for x in &self.points {
            let dot: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
            acc = acc.add(C64::unit(-dot));
        }
        acc.scale(1.0 / self.points.len() as f64)
    }
}

#[test]
fn criterion_12_oracle_agreement() {
    criterion(12, "independent oracle agreement", || {
        // Part 1: transform vs. hand-rolled cylinder quadrature on three
        // presets, 100 seeded points each. Inverse dilations and barycentres
        // are entered in closed form.
        let quarter_oracle = RiemannOracle::build(
            &[vec![0.25]],
            &[vec![0.0], vec![2.0]],
            &[1.0 / 3.0],
            11,
        );
        let third_oracle = RiemannOracle::build(
            &[vec![1.0 / 3.0]],
            &[vec![0.0], vec![2.0]],
            &[0.5],
            12,
        );
        let planar_oracle = RiemannOracle::build(
            &[vec![0.25, 0.0], vec![-0.0625, 0.25]],
            &[vec![0.0, 0.0], vec![0.0, 3.0], vec![1.0, 0.0], vec![1.0, 3.0]],
            &[1.0 / 6.0, 4.0 / 9.0],
            9,
        );
        let (qr, qb, _) = quarter();
        let (tr, tb) = third();
        let (pr, pb, _) = planar_upper();
        let cases: [(&str, &IntMatrix, &Vec<IntVector>, &RiemannOracle, f64); 3] = [
            ("quarter_cantor", &qr, &qb, &quarter_oracle, 5.0),
            ("third_cantor", &tr, &tb, &third_oracle, 5.0),
            ("ex_4_0_1_4", &pr, &pb, &planar_oracle, 1.0),
        ];
        let mut rng = Rng::new(0x05AC1E);
        let mut worst_gap = 0.0f64;
        for (name, r, b, oracle, span) in cases {
            let eval = lib(FourierEvaluator::new(r, b))?;
            let d = r.dim();
            for _ in 0..100 {
                let xi: Vec<f64> =
                    (0..d).map(|_| span * (2.0 * rng.uniform() - 1.0)).collect();
                let expected = oracle.transform(&xi);
                let got = eval.mu_hat(&xi, 1e-8);
                let gap = C64 { re: got.re - expected.re, im: got.im - expected.im }.norm();
                check!(
                    gap < 1e-5,
                    "{name}: transform differs from the Riemann oracle by {gap:.3e} at {xi:?}"
                );
                worst_gap = worst_gap.max(gap);
            }
        }

        // Part 2: quadrature partition identity. The mask values of the dual
        // digits at (R^T)^{-1}(xi + l) form a unit vector for every xi.
        let mut worst_dev = 0.0f64;
        for (name, triple) in verified_presets()? {
            let rt = triple.r.transpose();
            let det: f64 = rt.det().to_string().parse().map_err(|e| format!("{e}"))?;
            let adj = rt.adjugate().to_f64();
            let d = triple.r.dim();
            for _ in 0..200 {
                let xi: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
                let mut total = 0.0;
                for l in &triple.l {
                    let shifted: Vec<f64> =
                        xi.iter().zip(l.to_f64()).map(|(a, b)| a + b).collect();
                    let arg: Vec<f64> = (0..d)
                        .map(|i| (0..d).map(|j| adj[(i, j)] * shifted[j]).sum::<f64>() / det)
                        .collect();
                    total += mask_eval(&triple.b, &arg).norm_sqr();
                }
                check!(
                    (total - 1.0).abs() < 1e-10,
                    "{name}: quadrature identity off by {:.3e} at {xi:?}",
                    (total - 1.0).abs()
                );
                worst_dev = worst_dev.max((total - 1.0).abs());
            }
        }
        Ok(format!(
            "Riemann quadrature within {worst_gap:.2e} of the evaluator; partition identity within {worst_dev:.2e} on 800 points"
        ))
    });
}
