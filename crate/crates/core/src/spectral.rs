//! log det' of the Laplace-Beltrami operator of e^u |dz|^2.
//!
//! Two independent routes:
//!
//! * the integrated conformal anomaly: the closed-form flat value (Dedekind
//!   eta) rescaled to the metric's area, minus (1/48 pi) times the flat
//!   Dirichlet energy of u;
//! * zeta regularization of a computed low spectrum: the heat trace is split
//!   at t0 = 10 / lambda_K, the truncated sum (with its Weyl tail) is used
//!   above t0 and a fitted short-time expansion V/(4 pi t) + c0 + c1 t below.
//!
//! Along a conformal flow with velocity d/dt u the anomaly gives
//! d/dt log det' = (1/24 pi) int (R - R0)^2 dmu for the normalized Ricci flow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::variance_from;
use crate::eigen::{dense_spectrum, lowest_krylov, WeightedLaplacian};
use crate::error::{Error, Result};
use crate::geometry::{ConformalMetric, MetricAnalysis, TorusModulus};
use crate::special::{exp_integral_e1, log_abs_eta, EULER_GAMMA};

/// Coefficient of the flat Dirichlet energy of u in log det'.
pub const POLYAKOV_COEFFICIENT: f64 = 1.0 / (48.0 * PI);

/// C_P in d/dt log det' = C_P int (R - R0)^2 dmu.
pub const RATE_COEFFICIENT: f64 = 1.0 / (24.0 * PI);

/// Relative residual every returned eigenpair satisfies.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// Heat-trace split point in units of 1 / lambda_K.
pub const SPLIT_SCALE: f64 = 10.0;

const FIT_POINTS: usize = 64;
const FIT_REJECT: f64 = 0.05;

/// log det' Delta of the flat metric on C/(Z + tau Z) scaled to `area`:
/// log[(Im tau)^2 |eta(tau)|^4] + log(area / Im tau).
pub fn flat_logdet(tau: TorusModulus, area: f64) -> f64 {
    2.0 * tau.im().ln() + 4.0 * log_abs_eta(tau.re(), tau.im()) + (area / tau.im()).ln()
}

pub(crate) fn polyakov_from(tau: TorusModulus, a: &MetricAnalysis) -> f64 {
    flat_logdet(tau, a.volume) - POLYAKOV_COEFFICIENT * a.dirichlet_energy
}

/// log det' Delta_rho from the integrated anomaly.
pub fn polyakov_logdet(m: &ConformalMetric) -> f64 {
    polyakov_from(m.tau(), &m.analyze())
}

/// C_P int (R - R0)^2 dmu.
pub fn det_rate(m: &ConformalMetric) -> f64 {
    det_rate_with(m, RATE_COEFFICIENT)
}

/// `det_rate` with an explicit coefficient in place of C_P.
pub fn det_rate_with(m: &ConformalMetric, coefficient: f64) -> f64 {
    let a = m.analyze();
    coefficient * a.volume * variance_from(&a)
}

/// Sorted low spectrum with the zero mode first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Number of nonzero eigenvalues (`eigenvalues.len() - 1`).
    pub count: usize,
    pub zero_mode_error: f64,
}

/// Spectrum together with unit eigenvectors psi of the symmetrized operator.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub spectrum: SpectrumResult,
    /// psi_0 = e^{u/2} / |e^{u/2}| followed by psi_1..psi_K.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigenpairs {
    /// phi_k = e^{-u/2} psi_k, an eigenfunction of -Lap0 phi = lambda e^u phi.
    pub fn generalized_vector(&self, m: &ConformalMetric, k: usize) -> Vec<f64> {
        self.vectors[k].iter().zip(m.u()).map(|(p, u)| p * (-0.5 * u).exp()).collect()
    }
}

fn check_mode_count(m: &ConformalMetric, k: usize) -> Result<()> {
    let available = m.n() * m.n() / 4;
    if k == 0 || k + 1 > available {
        return Err(Error::TooManyModes { requested: k + 1, available });
    }
    Ok(())
}

fn zero_mode(values: &[f64], lambda0: f64, tol: f64) -> Result<SpectrumResult> {
    if !(lambda0.abs() < 1e-9 * values[0]) {
        return Err(Error::IterationFailure { converged: 0, wanted: values.len() + 1, tol, dim: 0 });
    }
    let mut eigenvalues = Vec::with_capacity(values.len() + 1);
    eigenvalues.push(lambda0);
    eigenvalues.extend_from_slice(values);
    Ok(SpectrumResult { count: values.len(), eigenvalues, zero_mode_error: lambda0.abs() })
}

/// The K + 1 smallest eigenvalues and their eigenvectors.
pub fn eigenpairs(m: &ConformalMetric, k: usize) -> Result<Eigenpairs> {
    check_mode_count(m, k)?;
    let a = WeightedLaplacian::new(m);
    let low = lowest_krylov(&a, k, EIGEN_TOLERANCE)?;
    let spectrum = zero_mode(&low.values, a.kernel_eigenvalue(), EIGEN_TOLERANCE)?;
    let mut vectors = Vec::with_capacity(k + 1);
    vectors.push(a.kernel().to_vec());
    vectors.extend(low.vectors);
    Ok(Eigenpairs { spectrum, vectors })
}

/// The K + 1 smallest eigenvalues of -e^{-u} Lap0 (matrix-free solver).
pub fn eigenvalues(m: &ConformalMetric, k: usize) -> Result<SpectrumResult> {
    Ok(eigenpairs(m, k)?.spectrum)
}

/// Same contract as [`eigenvalues`] through a dense eigendecomposition;
/// limited to n <= 32.
pub fn eigenvalues_dense(m: &ConformalMetric, k: usize) -> Result<SpectrumResult> {
    if m.n() > 32 {
        return Err(Error::InvalidGrid { n: m.n(), len: m.u().len() });
    }
    check_mode_count(m, k)?;
    let a = WeightedLaplacian::new(m);
    let all = dense_spectrum(&a)?;
    zero_mode(&all[1..=k], all[0], 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatTrace {
    pub value: f64,
    /// Weyl estimate (V / 4 pi t) e^{-lambda_K t} of the omitted tail.
    pub truncation_bound: f64,
}

/// sum_{k >= 1} e^{-lambda_k t} over the computed nonzero eigenvalues.
pub fn heat_trace(s: &SpectrumResult, t: f64, volume: f64) -> HeatTrace {
    let nonzero = &s.eigenvalues[1..];
    let value = nonzero.iter().map(|l| (-l * t).exp()).sum();
    let top = nonzero.last().copied().unwrap_or(0.0);
    HeatTrace { value, truncation_bound: volume / (4.0 * PI * t) * (-top * t).exp() }
}

/// Output of the zeta route.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaFit {
    pub logdet: f64,
    pub c0: f64,
    pub c1: f64,
    pub t0: f64,
}

/// -zeta'(0) from a computed spectrum of a metric with volume `volume`.
pub fn zeta_from_spectrum(s: &SpectrumResult, volume: f64) -> Result<ZetaFit> {
    let nonzero = &s.eigenvalues[1..];
    let top = *nonzero.last().ok_or(Error::TooManyModes { requested: 1, available: 0 })?;
    let t0 = SPLIT_SCALE / top;
    let weyl = |t: f64| volume / (4.0 * PI * t);

    // Least squares for theta(t) - V/(4 pi t) ~ c0 + c1 t on [t0, 2 t0].
    let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..FIT_POINTS {
        let t = t0 * (1.0 + i as f64 / (FIT_POINTS - 1) as f64);
        let h = heat_trace(s, t, volume);
        let y = h.value + h.truncation_bound - weyl(t);
        st += t;
        stt += t * t;
        sy += y;
        sty += t * y;
    }
    let np = FIT_POINTS as f64;
    let c1 = (np * sty - st * sy) / (np * stt - st * st);
    let c0 = (sy - c1 * st) / np;
    if (c0 + 1.0).abs() > FIT_REJECT {
        return Err(Error::FitRejected { c0 });
    }

    let x = top * t0;
    let tail = weyl(t0) * ((-x).exp() - x * exp_integral_e1(x));
    let large: f64 = nonzero.iter().map(|l| exp_integral_e1(l * t0)).sum::<f64>() + tail;
    let zeta_prime = c0 * (EULER_GAMMA + t0.ln()) - weyl(t0) + c1 * t0 + large;
    Ok(ZetaFit { logdet: -zeta_prime, c0, c1, t0 })
}

/// log det' Delta_rho by zeta regularization of the K lowest nonzero modes.
pub fn logdet_zeta(m: &ConformalMetric, k: usize) -> Result<f64> {
    let s = eigenvalues(m, k)?;
    Ok(zeta_from_spectrum(&s, m.volume())?.logdet)
}

/// Determinant summary for one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub logdet_polyakov: f64,
    pub logdet_zeta: Option<f64>,
    /// log det' of the flat metric |dz|^2 (area Im tau).
    pub flat_reference: f64,
    /// log(V / Im tau)
    pub volume_term: f64,
    /// -(1/48 pi) int |grad u|^2
    pub anomaly_term: f64,
    pub rate_formula: f64,
    pub volume: f64,
}

/// Builds a report; the zeta route runs only when `zeta_modes` is given.
pub fn det_report(m: &ConformalMetric, zeta_modes: Option<usize>) -> Result<DetReport> {
    let tau = m.tau();
    let a = m.analyze();
    let logdet_zeta = match zeta_modes {
        Some(k) => Some(logdet_zeta(m, k)?),
        None => None,
    };
    Ok(DetReport {
        logdet_polyakov: polyakov_from(tau, &a),
        logdet_zeta,
        flat_reference: flat_logdet(tau, tau.im()),
        volume_term: (a.volume / tau.im()).ln(),
        anomaly_term: -POLYAKOV_COEFFICIENT * a.dirichlet_energy,
        rate_formula: RATE_COEFFICIENT * a.volume * variance_from(&a),
        volume: a.volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::mode_field;

    // Epstein zeta value at tau = i, evaluated independently at high precision.
    const FLAT_SQUARE: f64 = -1.054_688_280_995_672;

    #[test]
    fn flat_reference_at_i() {
        assert!((flat_logdet(TorusModulus::SQUARE, 1.0) - FLAT_SQUARE).abs() < 1e-14);
        let two = flat_logdet(TorusModulus::SQUARE, 2.0);
        assert!((two - FLAT_SQUARE - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn polyakov_of_flat_and_constant_metrics() {
        let flat = ConformalMetric::new(16, TorusModulus::SQUARE, vec![0.0; 256], 1.0).unwrap();
        assert!((polyakov_logdet(&flat) - FLAT_SQUARE).abs() < 1e-14);
        let c = 0.4;
        assert!((polyakov_logdet(&flat.shifted(c)) - FLAT_SQUARE - c).abs() < 1e-13);
    }

    #[test]
    fn polyakov_small_cosine() {
        let eps = 0.05;
        let m =
            ConformalMetric::new(32, TorusModulus::SQUARE, mode_field(32, 1, 0, eps), 1.0).unwrap().normalize_volume();
        // Dirichlet energy of eps cos 2 pi x is 2 pi^2 eps^2.
        let want = FLAT_SQUARE - PI / 24.0 * eps * eps;
        assert!((polyakov_logdet(&m) - want).abs() < 1e-13);
        assert!((polyakov_logdet(&m) - (FLAT_SQUARE - 3.27e-4)).abs() < 1e-6);
    }

    #[test]
    fn rate_of_small_cosine() {
        let eps = 1e-4;
        let m =
            ConformalMetric::new(32, TorusModulus::SQUARE, mode_field(32, 1, 0, eps), 1.0).unwrap().normalize_volume();
        let want = PI.powi(3) / 3.0 * eps * eps;
        assert!((det_rate(&m) / want - 1.0).abs() < 1e-3);
        let flat = ConformalMetric::flat(16, TorusModulus::SQUARE, 1.0).unwrap();
        assert_eq!(det_rate(&flat), 0.0);
    }

    #[test]
    fn rate_scales_with_constant_shift() {
        let m = ConformalMetric::new(32, TorusModulus::SQUARE, mode_field(32, 2, 1, 0.3), 1.0).unwrap();
        let c = -0.6;
        let lhs = det_rate(&m.shifted(c));
        let rhs = (-c).exp() * det_rate(&m);
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_decomposes_exactly() {
        let m = ConformalMetric::new(32, TorusModulus::new(0.1, 1.3).unwrap(), mode_field(32, 1, 2, 0.2), 2.0).unwrap();
        let r = det_report(&m, None).unwrap();
        let sum = r.flat_reference + r.volume_term + r.anomaly_term;
        assert!((r.logdet_polyakov - sum).abs() < 1e-14);
        assert!(r.anomaly_term <= 0.0 && r.rate_formula >= 0.0);
        assert!(r.logdet_zeta.is_none());
    }

    #[test]
    fn heat_trace_limits() {
        let s = SpectrumResult { eigenvalues: vec![0.0, 1.0, 2.0], count: 2, zero_mode_error: 0.0 };
        assert!(heat_trace(&s, 1e3, 1.0).value < 1e-300);
        let a = heat_trace(&s, 0.1, 1.0).value;
        let b = heat_trace(&s, 0.2, 1.0).value;
        assert!(a > b);
    }

    #[test]
    fn too_many_modes_is_rejected() {
        let m = ConformalMetric::flat(8, TorusModulus::SQUARE, 1.0).unwrap();
        assert!(matches!(eigenvalues(&m, 16), Err(Error::TooManyModes { .. })));
        assert!(matches!(eigenvalues_dense(&m, 0), Err(Error::TooManyModes { .. })));
    }
}
