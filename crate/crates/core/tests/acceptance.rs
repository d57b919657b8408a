//! Acceptance suite: each test checks one numbered criterion end to end and
//! prints a PASS line (visible with --nocapture). Expected values come from
//! independent routes: brute-force enumeration for the exact spectra, exact
//! integer formulas against numerically integrated paths for the indices,
//! and the Fourier eigenvalue count against the crossing sweep.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use reeb_core::besse_spectra::{self, RationalEllipsoid};
use reeb_core::clarke::{self, SystoleOptions};
use reeb_core::symplectic_index::{
    count_crossings, hessian_form_negative_count, morse_index_nullity, path_from_generator,
    CrossingConfig, PathGenerator,
};
use reeb_core::{reeb_flow, ConvexBody, Point};
use std::time::Instant;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn ellipsoid(axes: &[i64]) -> RationalEllipsoid {
    RationalEllipsoid::new(axes.iter().map(|&a| rat(a, 1)).collect()).unwrap()
}

/// Brute-force invariant sequence: list all multiples m a_i <= cutoff, sort,
/// dedup, count divisors per value, expand. Deliberately naive and separate
/// from the heap-merge implementation under test.
fn brute_force_invariants(axes: &[i64], cutoff: i64) -> Vec<BigRational> {
    let mut values: Vec<BigRational> = Vec::new();
    for &a in axes {
        let mut m = 1;
        while a * m <= cutoff {
            values.push(rat(a * m, 1));
            m += 1;
        }
    }
    values.sort();
    values.dedup();
    let mut expanded = Vec::new();
    for v in values {
        let divisors = axes
            .iter()
            .filter(|&&a| (&v / rat(a, 1)).is_integer())
            .count();
        for _ in 0..divisors {
            expanded.push(v.clone());
        }
    }
    expanded
}

#[test]
fn criterion_1_spectrum_exactness() {
    let start = Instant::now();
    let cases: [&[i64]; 4] = [&[1, 2], &[2, 3], &[1, 1, 1], &[1, 2, 3]];
    for axes in cases {
        let cutoff = 12i64;
        let expected = brute_force_invariants(axes, cutoff);
        let ell = ellipsoid(axes);
        let got = besse_spectra::spectral_invariants(&ell, expected.len()).values;
        assert_eq!(got, expected, "invariants mismatch for {axes:?}");
        // the tail of the computed sequence must not extend past the cutoff
        // enumeration: the next invariant exceeds it
        let more = besse_spectra::spectral_invariants(&ell, expected.len() + 1).values;
        assert!(*more.last().unwrap() > rat(cutoff, 1) || more[..expected.len()] == expected[..]);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 1 exceeded 1 s: {elapsed:?}");
    println!("criterion 1 (spectrum/invariants exactness): PASS [{elapsed:?}]");
}

#[test]
#[allow(clippy::approx_constant)] // the approximant of sqrt(2) is the test input
fn criterion_2_besse_criterion() {
    let start = Instant::now();
    assert_eq!(besse_spectra::besse_criterion(&ellipsoid(&[1, 2]), 2, 10), Some(1));
    assert_eq!(besse_spectra::besse_criterion(&ellipsoid(&[1, 1]), 2, 10), Some(0));
    let approx = [1.0, 1.41421356237];
    assert_eq!(
        besse_spectra::float_besse_criterion(&approx, 2, 200, besse_spectra::FLOAT_COLLISION_TOL),
        None
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 2 exceeded 1 s: {elapsed:?}");
    println!("criterion 2 (Besse criterion): PASS [{elapsed:?}]");
}

/// Numeric index/nullity of the m-th iterate of the planar orbit in
/// coordinate plane i0, via flow integration and crossing sweep.
fn numeric_orbit_index(body: &ConvexBody, i0: usize, m: u64) -> (u64, u64) {
    let period = m as f64 * body.axes()[i0];
    let z0 = body.planar_point(i0);
    let traj = reeb_flow::reeb_flow(body, &z0, period, 16).unwrap();
    let path = reeb_flow::linearized_flow(body, &traj, period).unwrap();
    let result = morse_index_nullity(&path, &CrossingConfig::default()).unwrap();
    (result.index as u64, result.nullity as u64)
}

type IndexCase = ((Vec<i64>, usize, u64), (u64, u64), (u64, u64));

fn index_equivalence_cases() -> Vec<IndexCase> {
    let mut out = Vec::new();
    for axes in [vec![1i64, 2], vec![2, 3], vec![1, 1, 2]] {
        let ell = ellipsoid(&axes);
        let body = ConvexBody::ellipsoid(axes.iter().map(|&a| a as f64).collect()).unwrap();
        for i0 in 0..axes.len() {
            let mut m = 1u64;
            while axes[i0] * m as i64 <= 6 {
                let exact = besse_spectra::ellipsoid_orbit_index(&ell, i0, m);
                let numeric = numeric_orbit_index(&body, i0, m);
                out.push(((axes.clone(), i0, m), exact, numeric));
                m += 1;
            }
        }
    }
    out
}

#[test]
fn criterion_3_index_formula_equivalence() {
    let start = Instant::now();
    let cases = index_equivalence_cases();
    assert!(cases.len() >= 20, "expected a rich orbit set, got {}", cases.len());
    for (label, exact, numeric) in &cases {
        assert_eq!(numeric, exact, "index mismatch for {label:?}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "criterion 3 exceeded 30 s: {elapsed:?}");
    println!(
        "criterion 3 (index-formula equivalence, {} orbits): PASS [{elapsed:?}]",
        cases.len()
    );
}

#[test]
fn criterion_4_crossing_eigenvalue_equivalence() {
    let start = Instant::now();
    let mut matched = 0;
    for seed in 0..50u64 {
        let n = 1 + (seed % 2) as usize;
        let gen = PathGenerator::random_trig(n, 1.0 / (4.0 * std::f64::consts::PI), 1000 + seed);
        let path = path_from_generator(&gen, 1.0).unwrap();
        let crossings = count_crossings(&path, &CrossingConfig::default()).unwrap();
        let interior: usize = crossings
            .iter()
            .filter(|c| c.t < 1.0 - 1e-7)
            .map(|c| c.kernel_dim)
            .sum();
        let count = hessian_form_negative_count(&gen, 1.0, 64).unwrap();
        assert_eq!(count, interior, "route mismatch at seed {seed}");
        matched += 1;
    }
    let elapsed = start.elapsed();
    assert_eq!(matched, 50);
    assert!(elapsed.as_secs_f64() < 120.0, "criterion 4 exceeded 2 min: {elapsed:?}");
    println!("criterion 4 (crossing/eigenvalue equivalence, 50/50): PASS [{elapsed:?}]");
}

#[test]
fn criterion_5_parity() {
    let start = Instant::now();
    let cases = index_equivalence_cases();
    for (label, exact, numeric) in &cases {
        for (ind, nul) in [exact, numeric] {
            assert!(ind % 2 == 0, "odd index at {label:?}");
            assert!(nul % 2 == 1, "even nullity at {label:?}");
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 5 (even index / odd nullity on {} orbit cases): PASS [{elapsed:?}]",
        cases.len()
    );
}

#[test]
fn criterion_6_systole() {
    let start = Instant::now();
    let body = ConvexBody::ellipsoid(vec![1.0, 2.0]).unwrap();
    let opts = SystoleOptions {
        n_modes: 64,
        restarts: 16,
        seed: 2024,
        ..Default::default()
    };
    let result = clarke::minimize_systole(&body, &opts).unwrap();
    let hits = result
        .outcomes
        .iter()
        .filter(|o| o.converged && (o.value - 1.0).abs() <= 1e-6)
        .count();
    assert!(hits >= 14, "only {hits}/16 restarts reached the systole");
    assert!((result.c0 - 1.0).abs() <= 1e-6);
    let elapsed_a = start.elapsed();
    assert!(elapsed_a.as_secs_f64() < 60.0, "ellipsoid systole exceeded 1 min");

    let mid = Instant::now();
    let body = ConvexBody::dual_power(vec![1.0, 2.0], 2.0).unwrap();
    let result = clarke::minimize_systole(&body, &opts).unwrap();
    let refined = reeb_flow::find_closed_orbit(&body, &result.orbit.initial_point, result.c0).unwrap();
    assert!(
        (result.c0 - refined.period).abs() <= 1e-6,
        "variational {} vs shooting {}",
        result.c0,
        refined.period
    );
    assert!(refined.residual <= 1e-9);
    let elapsed_b = mid.elapsed();
    assert!(elapsed_b.as_secs_f64() < 60.0, "dual-power systole exceeded 1 min");
    println!(
        "criterion 6 (systole: {hits}/16 restarts at 1.0, shooting agreement {:.2e}): PASS [{:?} + {:?}]",
        (result.c0 - refined.period).abs(),
        elapsed_a,
        elapsed_b
    );
}

#[test]
fn criterion_7_ladder_identity() {
    let start = Instant::now();
    let cases: [&[i64]; 5] = [&[1, 2], &[2, 3], &[1, 1, 1], &[1, 2, 3], &[1, 1, 2]];
    for axes in cases {
        let ell = ellipsoid(axes);
        let horizon = rat(21 * axes.iter().max().unwrap(), 1);
        // iota_ladder verifies iota0(j+1) = iota1(j) + 2 internally and
        // errors on any violation
        let ladder = besse_spectra::iota_ladder(&ell, &horizon).unwrap();
        assert!(ladder.len() >= 20, "need 20 spectrum values for {axes:?}");
        for entry in ladder.iter().take(20) {
            assert_eq!(
                entry.multiplicity as u64,
                1 + (entry.iota1 - entry.iota0) / 2,
                "multiplicity identity fails at sigma = {} for {axes:?}",
                entry.sigma
            );
        }
        // the ladder pins the invariant sequence: c_{iota0/2} = c_{iota1/2} = sigma
        let needed = (ladder[19].iota1 / 2 + 1) as usize;
        let invariants = besse_spectra::spectral_invariants(&ell, needed).values;
        for entry in ladder.iter().take(20) {
            assert_eq!(invariants[(entry.iota0 / 2) as usize], entry.sigma);
            assert_eq!(invariants[(entry.iota1 / 2) as usize], entry.sigma);
        }
    }
    let elapsed = start.elapsed();
    println!("criterion 7 (index ladder, 20 values x 5 ellipsoids): PASS [{elapsed:?}]");
}

#[test]
fn criterion_8_numerical_hygiene() {
    let start = Instant::now();
    let mut worst_drift = 0.0f64;
    let mut worst_defect = 0.0f64;
    let ellipsoids: [&[f64]; 4] = [&[1.0, 2.0], &[2.0, 3.0], &[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]];
    for axes in ellipsoids {
        let body = ConvexBody::ellipsoid(axes.to_vec()).unwrap();
        let period = axes[0];
        let z0 = body.planar_point(0);
        let traj = reeb_flow::reeb_flow(&body, &z0, period, 64).unwrap();
        worst_drift = worst_drift.max(traj.drift);
        let path = reeb_flow::linearized_flow(&body, &traj, period).unwrap();
        worst_defect = worst_defect.max(path.max_symplectic_defect());
    }
    // dual-power body: one period of the short resonant orbit
    let body = ConvexBody::dual_power(vec![1.0, 2.0], 2.0).unwrap();
    let opts = SystoleOptions {
        n_modes: 16,
        restarts: 2,
        seed: 7,
        ..Default::default()
    };
    let result = clarke::minimize_systole(&body, &opts).unwrap();
    let traj = reeb_flow::reeb_flow(&body, &result.orbit.initial_point, result.c0, 64).unwrap();
    worst_drift = worst_drift.max(traj.drift);
    let path = reeb_flow::linearized_flow(&body, &traj, result.c0).unwrap();
    worst_defect = worst_defect.max(path.max_symplectic_defect());

    assert!(worst_drift <= 1e-8, "energy drift {worst_drift:.3e}");
    assert!(worst_defect <= 1e-8, "symplectic defect {worst_defect:.3e}");
    let elapsed = start.elapsed();
    println!(
        "criterion 8 (energy drift {worst_drift:.2e}, symplectic defect {worst_defect:.2e}): PASS [{elapsed:?}]"
    );
}

#[test]
fn criterion_9_stability_and_real_eigenvalues() {
    let start = Instant::now();

    // crossing persistence under perturbation of the generator
    let eps = 0.02;
    for seed in 0..20u64 {
        let n = 1 + (seed % 2) as usize;
        let scale = 1.0 / (4.0 * std::f64::consts::PI);
        let base = PathGenerator::random_trig(n, scale, 3000 + seed);
        let bump = PathGenerator::random_trig(n, scale * 0.02, 4000 + seed);
        let perturbed = PathGenerator::new(2 * n, "perturbed", move |t| {
            let mut a = base.sample(t)?;
            a += bump.sample(t)? - DMatrix::<f64>::identity(2 * n, 2 * n) * scale * 0.02;
            Ok(a)
        });
        let reference = PathGenerator::random_trig(n, scale, 3000 + seed);
        let cfg = CrossingConfig::default();
        let path = path_from_generator(&reference, 1.0).unwrap();
        let originals = count_crossings(&path, &cfg).unwrap();
        let path_p = path_from_generator(&perturbed, 1.0).unwrap();
        let moved = count_crossings(&path_p, &cfg).unwrap();
        for orig in originals.iter().filter(|c| c.t < 1.0 - eps) {
            assert!(
                moved.iter().any(|c| (c.t - orig.t).abs() <= eps),
                "crossing at {} vanished under perturbation (seed {seed})",
                orig.t
            );
        }
    }

    // no real eigenvalues just after a root-of-identity time
    let mut rng_state = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng_state >> 33) as i64
    };
    for case in 0..20 {
        let n = 2 + (case % 2) as usize;
        let mut axes: Vec<(i64, i64)> = (0..n).map(|_| (1 + next() % 6, 1 + next() % 3)).collect();
        axes.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
        let floats: Vec<f64> = axes.iter().map(|&(p, q)| p as f64 / q as f64).collect();
        let body = ConvexBody::ellipsoid(floats.clone()).unwrap();
        // crossing time: a multiple of one of the axes
        let i0 = (next() as usize) % n;
        let m = (1 + next() % 2) as f64;
        let t_c = m * floats[i0];
        // safe window: distance from t_c to the nearest other half-period
        let mut window = f64::INFINITY;
        for &a in &floats {
            let half = a / 2.0;
            let ratio = t_c / half;
            let frac = ratio - ratio.floor();
            let dist = frac.min(1.0 - frac);
            let d = if dist < 1e-9 { half } else { dist * half };
            window = window.min(d);
        }
        let z0 = body
            .project_to_unit_level(&Point::from_iterator(2 * n, (0..2 * n).map(|i| 1.0 + i as f64)))
            .unwrap();
        let span = t_c + 0.95 * window;
        let traj = reeb_flow::reeb_flow(&body, &z0, span, 16).unwrap();
        let path = reeb_flow::linearized_flow(&body, &traj, span).unwrap();
        // the clock starts at a root of the identity
        let gamma_c = path.eval(t_c).unwrap();
        for j in 1..=10 {
            let dt = 0.9 * window * j as f64 / 10.0;
            for t in [t_c + dt, t_c - dt] {
                let gamma = path.eval(t).unwrap();
                let rel = &gamma * gamma_c.clone().try_inverse().unwrap();
                for lambda in rel.complex_eigenvalues().iter() {
                    assert!(
                        lambda.im.abs() > 1e-9 * lambda.norm(),
                        "real eigenvalue {lambda} at offset {dt} (case {case})"
                    );
                }
                // the unshifted path has none either: its eigenvalues are
                // those of the rotation blocks away from angle 0 mod pi
                for lambda in gamma.complex_eigenvalues().iter() {
                    assert!(lambda.im.abs() > 1e-9 * lambda.norm());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    println!("criterion 9 (crossing stability + complex spectra, 20+20 cases): PASS [{elapsed:?}]");
}
