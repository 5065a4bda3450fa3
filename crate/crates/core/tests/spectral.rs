use std::f64::consts::PI;

use torus_ricci::analysis::cauchy_gap;
use torus_ricci::fields::{mode_field, InitialField};
use torus_ricci::geometry::{flat_laplacian, ConformalMetric, TorusModulus};
use torus_ricci::spectral::{
    det_rate, det_report, eigenpairs, eigenvalues, eigenvalues_dense, flat_logdet, heat_trace, logdet_zeta,
    polyakov_logdet, zeta_from_spectrum, SpectrumResult, RATE_COEFFICIENT,
};
use torus_ricci::Error;

// Independent high-precision lattice-sum values of log det' on flat tori.
const FLAT_SQUARE: f64 = -1.054_688_280_995_672;
const FLAT_SKEW_UNIT_AREA: f64 = -1.249_579_193_584_04; // tau = 0.3 + 1.7i
const FLAT_TALL_UNIT_AREA: f64 = -1.401_261_871_275_644_6; // tau = 2i

fn square() -> TorusModulus {
    TorusModulus::SQUARE
}

fn seeded(n: usize, seed: u64, bandlimit: usize, amplitude: f64, tau: TorusModulus) -> ConformalMetric {
    InitialField::Random { seed, bandlimit, amplitude }.metric(n, tau, 1.0).unwrap()
}

#[test]
fn flat_reference_values() {
    assert!((flat_logdet(square(), 1.0) - FLAT_SQUARE).abs() < 1e-13);
    assert!((flat_logdet(square(), 2.0) - FLAT_SQUARE - 2f64.ln()).abs() < 1e-13);
    let tau = TorusModulus::new(0.3, 1.7).unwrap();
    for t in [tau, tau.s_transform(), tau.t_transform(), tau.t_transform().s_transform()] {
        assert!((flat_logdet(t, 1.0) - FLAT_SKEW_UNIT_AREA).abs() < 1e-12);
    }
    for t in [TorusModulus::new(0.0, 2.0).unwrap(), TorusModulus::new(1.0, 2.0).unwrap()] {
        assert!((flat_logdet(t, 1.0) - FLAT_TALL_UNIT_AREA).abs() < 1e-12);
    }
}

#[test]
fn polyakov_examples() {
    let flat = ConformalMetric::flat(32, square(), 1.0).unwrap();
    assert_eq!(polyakov_logdet(&flat), flat_logdet(square(), 1.0));

    let c = 0.4;
    let scaled = ConformalMetric::new(32, square(), vec![c; 1024], 1.0).unwrap();
    assert!((polyakov_logdet(&scaled) - (FLAT_SQUARE + c)).abs() < 1e-13);

    let eps = 0.05;
    let m = ConformalMetric::new(32, square(), mode_field(32, 1, 0, eps), 1.0).unwrap().normalize_volume();
    let predicted = FLAT_SQUARE - PI / 24.0 * eps * eps;
    assert!((polyakov_logdet(&m) - predicted).abs() < 1e-12);
}

#[test]
fn report_decomposes() {
    let m = seeded(32, 9, 3, 0.3, TorusModulus::new(-0.2, 0.9).unwrap());
    let r = det_report(&m, None).unwrap();
    assert!((r.flat_reference + r.volume_term + r.anomaly_term - r.logdet_polyakov).abs() < 1e-13);
    assert!(r.anomaly_term <= 0.0);
    assert!((r.volume_term - (1.0f64 / 0.9).ln()).abs() < 1e-13);
    assert!(r.logdet_zeta.is_none());
}

#[test]
fn flat_square_spectrum() {
    let m = ConformalMetric::flat(16, square(), 1.0).unwrap();
    let l1 = 4.0 * PI * PI;
    let expected = [0.0, l1, l1, l1, l1, 2.0 * l1, 2.0 * l1, 2.0 * l1, 2.0 * l1];
    for s in [eigenvalues(&m, 8).unwrap(), eigenvalues_dense(&m, 8).unwrap()] {
        assert_eq!(s.count, 8);
        assert!(s.eigenvalues[0].abs() < 1e-9 * l1);
        for (a, b) in s.eigenvalues[1..].iter().zip(&expected[1..]) {
            assert!((a - b).abs() <= 1e-8 * b);
        }
    }
}

#[test]
fn constant_shift_rescales_the_spectrum() {
    let c = 0.6;
    let m = ConformalMetric::new(16, square(), vec![c; 256], 1.0).unwrap();
    let s = eigenvalues(&m, 8).unwrap();
    let l1 = 4.0 * PI * PI * (-c).exp();
    for (i, v) in s.eigenvalues[1..].iter().enumerate() {
        let want = if i < 4 { l1 } else { 2.0 * l1 };
        assert!((v - want).abs() <= 1e-8 * want);
    }
}

#[test]
fn iterative_solver_matches_dense() {
    let m = seeded(16, 21, 3, 0.4, TorusModulus::new(0.25, 1.15).unwrap());
    let a = eigenvalues(&m, 40).unwrap();
    let b = eigenvalues_dense(&m, 40).unwrap();
    for (x, y) in a.eigenvalues[1..].iter().zip(&b.eigenvalues[1..]) {
        assert!((x - y).abs() <= 1e-8 * y, "{x} vs {y}");
    }
}

#[test]
fn eigenvectors_solve_the_weighted_problem() {
    let m = seeded(32, 5, 4, 0.3, TorusModulus::new(0.1, 1.3).unwrap());
    let pairs = eigenpairs(&m, 30).unwrap();
    let rho: Vec<f64> = m.u().iter().map(|u| u.exp()).collect();
    // the kernel vector is constant in the generalized problem
    let phi0 = pairs.generalized_vector(&m, 0);
    let spread = phi0.iter().fold(0.0f64, |a, v| a.max((v - phi0[0]).abs()));
    assert!(spread <= 1e-12 * phi0[0].abs());
    for k in 1..=30 {
        let lambda = pairs.spectrum.eigenvalues[k];
        let phi = pairs.generalized_vector(&m, k);
        let lap = flat_laplacian(&phi, m.tau()).unwrap();
        let mut res = 0.0;
        let mut scale = 0.0;
        for i in 0..phi.len() {
            let rhs = lambda * rho[i] * phi[i];
            res += (lap[i] + rhs).powi(2);
            scale += rhs * rhs;
        }
        assert!(res.sqrt() <= 1e-8 * scale.sqrt(), "pair {k}");
    }
}

#[test]
fn counting_function_follows_weyl() {
    let m = seeded(64, 3, 8, 0.2, square());
    let s = eigenvalues(&m, 200).unwrap();
    let v = m.volume();
    // N(lambda) sampled midway between consecutive eigenvalues averages out
    // the lattice-point jumps; the mean deviation is what Weyl's law controls.
    let mut total = 0.0;
    let mut count = 0;
    for j in 50..200 {
        let lambda = 0.5 * (s.eigenvalues[j] + s.eigenvalues[j + 1]);
        let weyl = v * lambda / (4.0 * PI);
        total += ((j + 1) as f64 - weyl) / weyl;
        count += 1;
    }
    let mean = total / count as f64;
    assert!(mean.abs() < 0.05, "mean relative deviation {mean}");
}

#[test]
fn heat_trace_examples() {
    let m = ConformalMetric::flat(32, square(), 1.0).unwrap();
    let s = eigenvalues(&m, 120).unwrap();
    // lattice sum of e^{-4 pi^2 (m^2 + n^2) t} over nonzero (m, n) at t = 0.05
    let h = heat_trace(&s, 0.05, 1.0);
    assert!((h.value - 0.634_733_571_99).abs() < 1e-9, "{}", h.value);
    assert!(h.truncation_bound < 1e-9);
    let mut last = f64::INFINITY;
    for t in [0.01, 0.05, 0.1, 0.5, 1.0, 5.0] {
        let v = heat_trace(&s, t, 1.0).value;
        assert!(v < last);
        last = v;
    }
    assert!(heat_trace(&s, 50.0, 1.0).value < 1e-300);
}

#[test]
fn zeta_route_on_flat_tori() {
    let m = ConformalMetric::flat(64, square(), 1.0).unwrap();
    let z = logdet_zeta(&m, 400).unwrap();
    assert!((z - FLAT_SQUARE).abs() < 1e-2, "{z}");

    let big = ConformalMetric::flat(64, square(), 2.0).unwrap();
    let z2 = logdet_zeta(&big, 400).unwrap();
    assert!((z2 - FLAT_SQUARE - 2f64.ln()).abs() < 1e-2, "{z2}");
}

#[test]
fn zeta_route_agrees_with_polyakov() {
    let cos = ConformalMetric::new(64, square(), mode_field(64, 1, 0, 0.3), 1.0).unwrap().normalize_volume();
    let skew = seeded(64, 2, 2, 0.2, TorusModulus::new(0.2, 1.1).unwrap());
    for m in [cos, skew] {
        let z = logdet_zeta(&m, 400).unwrap();
        let p = polyakov_logdet(&m);
        assert!((z - p).abs() < 1e-2, "zeta {z} vs polyakov {p}");
    }
}

#[test]
fn under_resolved_fit_is_rejected() {
    let m = ConformalMetric::flat(32, square(), 1.0).unwrap();
    let s = eigenvalues(&m, 5).unwrap();
    assert!(matches!(zeta_from_spectrum(&s, 1.0), Err(Error::FitRejected { .. })));
}

#[test]
fn mode_requests_are_bounded() {
    let m = ConformalMetric::flat(16, square(), 1.0).unwrap();
    assert!(matches!(eigenvalues(&m, 64), Err(Error::TooManyModes { .. })));
    assert!(matches!(eigenvalues(&m, 0), Err(Error::TooManyModes { .. })));
    let big = ConformalMetric::flat(64, square(), 1.0).unwrap();
    assert!(eigenvalues_dense(&big, 8).is_err());
}

#[test]
fn rate_examples() {
    assert_eq!(det_rate(&ConformalMetric::flat(32, square(), 1.0).unwrap()), 0.0);

    let eps = 1e-3;
    let m = ConformalMetric::new(32, square(), mode_field(32, 1, 0, eps), 1.0).unwrap().normalize_volume();
    let predicted = PI.powi(3) / 3.0 * eps * eps;
    assert!((det_rate(&m) / predicted - 1.0).abs() < 1e-2);

    let m = seeded(32, 8, 3, 0.4, TorusModulus::new(0.3, 0.8).unwrap());
    let c = -0.8;
    let a = det_rate(&m);
    let b = det_rate(&m.shifted(c));
    assert!((b - (-c).exp() * a).abs() <= 1e-12 * b);
    assert!((a - RATE_COEFFICIENT * cauchy_gap(&m) * m.volume()).abs() <= 1e-14 * a);
}

#[test]
fn spectrum_serializes() {
    let s = SpectrumResult { eigenvalues: vec![0.0, 1.5, 2.25], count: 2, zero_mode_error: 0.0 };
    let text = serde_json::to_string(&s).unwrap();
    assert_eq!(serde_json::from_str::<SpectrumResult>(&text).unwrap(), s);
}
