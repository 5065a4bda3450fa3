//! Certificates and experiments built on flow trajectories and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{mode_field, random_field};
use crate::flow::Trajectory;
use crate::geometry::{ConformalMetric, MetricAnalysis, TorusModulus};
use crate::par;
use crate::spectral::{flat_logdet, polyakov_logdet};

/// Variance of R under dmu / V.
pub(crate) fn variance_from(a: &MetricAnalysis) -> f64 {
    let mass: f64 = a.rho.iter().sum();
    let s: f64 = a.r.iter().zip(&a.rho).map(|(r, p)| (r - a.r0).powi(2) * p).sum();
    s / mass
}

/// (int R^2 dmu int dmu - (int R dmu)^2) / V^2, the variance of R under dmu / V.
pub fn cauchy_gap(m: &ConformalMetric) -> f64 {
    variance_from(&m.analyze())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub logdet_before: f64,
    pub logdet_after: f64,
    /// logdet_after - logdet_before + tol * dt; negative when violated.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub min_rate: f64,
    /// Smallest slack over all adjacent sample pairs.
    pub min_slack: f64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Checks that logdet_polyakov never drops by more than `tol` per unit time
/// and that no sampled rate is below `-tol`.
pub fn monotonicity_certificate(traj: &Trajectory, tol: f64) -> Result<MonotonicityReport> {
    let s = &traj.samples;
    if s.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for w in s.windows(2) {
        let slack = w[1].logdet_polyakov - w[0].logdet_polyakov + tol * (w[1].t - w[0].t);
        min_slack = min_slack.min(slack);
        if slack < 0.0 {
            violations.push(Violation {
                t: w[1].t,
                logdet_before: w[0].logdet_polyakov,
                logdet_after: w[1].logdet_polyakov,
                slack,
            });
        }
    }
    if min_slack == f64::INFINITY {
        // single sample: nothing moved
        min_slack = 0.0;
    }
    let min_rate = s.iter().map(|r| r.rate_formula).fold(f64::INFINITY, f64::min);
    let passed = violations.is_empty() && min_rate >= -tol;
    Ok(MonotonicityReport { samples: s.len(), min_rate, min_slack, violations, passed })
}

/// Perturbation direction for a maximality sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepDirection {
    /// cos 2 pi (m x + k y)
    Mode { m: i64, k: i64 },
    /// Seeded band-limited field with unit sup-norm.
    Seeded { seed: u64, bandlimit: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub logdet: f64,
    pub delta_vs_flat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// c in delta ~ -c eps^2, fitted on the three smallest nonzero |eps|.
    pub quadratic_coefficient: f64,
    /// Every nonzero row lies strictly below the flat value.
    pub flat_is_maximum: bool,
}

pub const DEFAULT_SWEEP_EPS: [f64; 4] = [0.02, 0.04, 0.08, 0.16];

/// log det' along u = eps * direction (volume-normalized) against the flat
/// metric of the same volume and modulus.
pub fn maximality_sweep(
    direction: &SweepDirection,
    eps_list: &[f64],
    tau: TorusModulus,
    n: usize,
    volume: f64,
) -> Result<SweepResult> {
    let shape = match *direction {
        SweepDirection::Mode { m, k } => mode_field(n, m, k, 1.0),
        SweepDirection::Seeded { seed, bandlimit } => random_field(n, seed, bandlimit, 1.0)?,
    };
    let flat = flat_logdet(tau, volume);
    let rows = par::map(eps_list, |&eps| -> Result<SweepRow> {
        let u = shape.iter().map(|v| eps * v).collect();
        let m = ConformalMetric::new(n, tau, u, volume)?.normalize_volume();
        let logdet = polyakov_logdet(&m);
        Ok(SweepRow { eps, logdet, delta_vs_flat: logdet - flat })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut fit: Vec<&SweepRow> = rows.iter().filter(|r| r.eps != 0.0).collect();
    fit.sort_by(|a, b| a.eps.abs().total_cmp(&b.eps.abs()));
    fit.truncate(3);
    let num: f64 = fit.iter().map(|r| r.delta_vs_flat * r.eps * r.eps).sum();
    let den: f64 = fit.iter().map(|r| r.eps.powi(4)).sum();
    let quadratic_coefficient = if den > 0.0 { -num / den } else { 0.0 };
    let flat_is_maximum = rows.iter().all(|r| r.eps == 0.0 || r.delta_vs_flat < 0.0);
    Ok(SweepResult { rows, quadratic_coefficient, flat_is_maximum })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    /// Exponential decay rate of sup |R - R0|.
    pub rate: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares slope of log(residual) against t over the final decade of
/// residual decay.
pub fn convergence_fit(traj: &Trajectory) -> Result<ConvergenceFit> {
    let s = &traj.samples;
    let last = s.last().ok_or(Error::EmptyTrajectory)?.sup_resid;
    if !(last < 0.1) || last <= 0.0 {
        return Err(Error::InsufficientDecay { samples: 0 });
    }
    let ceiling = 10.0 * last;
    // Walk back from the end while the residual stays within the decade.
    let start = s.iter().rposition(|r| r.sup_resid > ceiling).map_or(0, |i| i + 1);
    let window = &s[start..];
    if window.len() < 5 {
        return Err(Error::InsufficientDecay { samples: window.len() });
    }
    let np = window.len() as f64;
    let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for r in window {
        let y = r.sup_resid.ln();
        st += r.t;
        stt += r.t * r.t;
        sy += y;
        sty += r.t * y;
    }
    let slope = (np * sty - st * sy) / (np * stt - st * st);
    Ok(ConvergenceFit { rate: -slope, window: (window[0].t, window[window.len() - 1].t), samples: window.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve, DiagnosticRow, FlowConfig, FlowState, Termination};
    use std::f64::consts::PI;

    fn row(t: f64, logdet: f64, resid: f64) -> DiagnosticRow {
        DiagnosticRow {
            t,
            dt: 0.0,
            volume: 1.0,
            r0: 0.0,
            sup_resid: resid,
            var_r: 0.0,
            logdet_polyakov: logdet,
            rate_formula: 0.0,
            rate_fd: None,
            gb_defect: 0.0,
        }
    }

    fn fake(samples: Vec<DiagnosticRow>) -> Trajectory {
        let m = ConformalMetric::flat(8, TorusModulus::SQUARE, 1.0).unwrap();
        Trajectory { samples, final_state: FlowState::new(m), termination: Termination::TimeLimit, abort: None }
    }

    #[test]
    fn certificate_flags_injected_decrease() {
        let mut rows: Vec<_> = (0..10).map(|i| row(i as f64 * 0.1, -1.0 + 1e-3 * i as f64, 1.0)).collect();
        let r = monotonicity_certificate(&fake(rows.clone()), 1e-9).unwrap();
        assert!(r.passed && r.violations.is_empty());
        rows[6].logdet_polyakov -= 0.01;
        let r = monotonicity_certificate(&fake(rows), 1e-9).unwrap();
        assert!(!r.passed);
        // Dropping sample 6 breaks exactly one adjacent pair (5 -> 6).
        assert_eq!(r.violations.len(), 1);
        assert!((r.violations[0].t - 0.6).abs() < 1e-15);
    }

    #[test]
    fn certificate_needs_a_sample() {
        assert!(matches!(monotonicity_certificate(&fake(vec![]), 1e-9), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn flat_start_certificate() {
        let m = ConformalMetric::flat(16, TorusModulus::SQUARE, 1.0).unwrap();
        let traj = evolve(&m, &FlowConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::Stationary);
        let r = monotonicity_certificate(&traj, 1e-9).unwrap();
        assert!(r.passed && r.violations.is_empty());
        assert_eq!(r.min_slack, 0.0);
    }

    #[test]
    fn cauchy_gap_cases() {
        let flat = ConformalMetric::flat(16, TorusModulus::SQUARE, 1.0).unwrap();
        assert_eq!(cauchy_gap(&flat), 0.0);
        let eps = 1e-4;
        let m =
            ConformalMetric::new(32, TorusModulus::SQUARE, mode_field(32, 1, 0, eps), 1.0).unwrap().normalize_volume();
        let want = 8.0 * PI.powi(4) * eps * eps;
        assert!((cauchy_gap(&m) / want - 1.0).abs() < 1e-3);
        let rate = crate::spectral::det_rate(&m);
        assert!((cauchy_gap(&m) - rate / crate::spectral::RATE_COEFFICIENT / m.volume()).abs() < 1e-12 * want);
    }

    #[test]
    fn sweep_along_cos_x() {
        let eps = [0.0, 0.02, 0.04, 0.08, 0.16];
        let r = maximality_sweep(&SweepDirection::Mode { m: 1, k: 0 }, &eps, TorusModulus::SQUARE, 32, 1.0).unwrap();
        assert_eq!(r.rows[0].delta_vs_flat, 0.0);
        assert!(r.flat_is_maximum);
        assert!((r.quadratic_coefficient / (PI / 24.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn convergence_fit_on_synthetic_decay() {
        let rows: Vec<_> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.005;
                row(t, 0.0, 0.5 * (-7.0 * t).exp())
            })
            .collect();
        let fit = convergence_fit(&fake(rows)).unwrap();
        assert!((fit.rate - 7.0).abs() < 1e-9);
        let short: Vec<_> = (0..3).map(|i| row(i as f64, 0.0, 0.01)).collect();
        assert!(matches!(convergence_fit(&fake(short)), Err(Error::InsufficientDecay { .. })));
    }
}
