//! Cross-module invariant suite behind `torus-ricci verify`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{cauchy_gap, monotonicity_certificate};
use crate::error::{Error, Result};
use crate::fields::InitialField;
use crate::flow::{evolve, FlowConfig, Trajectory};
use crate::geometry::{flat_laplacian, ConformalMetric, TorusModulus};
use crate::io::RunConfig;
use crate::par;
use crate::spectral::{eigenvalues, flat_logdet, polyakov_logdet, RATE_COEFFICIENT};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Directory of run configs replacing the built-in seeded runs.
    pub corpus: Option<PathBuf>,
    /// Multiplies the rate coefficient; anything but 1 must fail the rate row.
    pub rate_coefficient_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { corpus: None, rate_coefficient_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, limit: f64) -> CheckResult {
    CheckResult { name, passed: worst <= limit, detail: format!("worst {worst:.3e} (limit {limit:.1e})") }
}

pub fn default_corpus() -> Vec<RunConfig> {
    (1..=3)
        .map(|seed| RunConfig {
            grid_n: 32,
            tau: [0.0, 1.0],
            volume_target: 1.0,
            init: crate::io::InitSpec {
                kind: crate::io::InitKind::Random,
                mode: None,
                seed: Some(seed),
                amplitude: 0.2,
                bandlimit: Some(2),
            },
            flow: FlowConfig::default(),
            det: Default::default(),
        })
        .collect()
}

pub fn load_corpus(dir: &Path) -> Result<Vec<RunConfig>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Parse { path: dir.to_path_buf(), reason: "no run configs (*.json) in corpus".into() });
    }
    paths.iter().map(|p| RunConfig::load(p)).collect()
}

fn random_metrics(count: u64) -> Result<Vec<ConformalMetric>> {
    (0..count)
        .map(|i| {
            let field = InitialField::Random { seed: 100 + i, bandlimit: 1 + (i as usize % 7), amplitude: 0.5 };
            field.metric(32, TorusModulus::new(0.1 * i as f64, 0.7 + 0.05 * i as f64)?, 1.0)
        })
        .collect()
}

fn gauss_bonnet(metrics: &[ConformalMetric]) -> CheckResult {
    let worst = metrics
        .iter()
        .map(|m| {
            let c = m.scalar_curvature();
            let rho: Vec<f64> = m.u().iter().map(|v| v.exp()).collect();
            let abs = m.tau().im() * c.r.iter().zip(&rho).map(|(r, p)| r.abs() * p).sum::<f64>() / rho.len() as f64;
            c.gb_defect.abs() / (1.0 + abs)
        })
        .fold(0.0, f64::max);
    check("gauss_bonnet", worst, 1e-8)
}

fn laplacian_symbol() -> Result<CheckResult> {
    let n = 16;
    let tau = TorusModulus::new(0.3, 1.7)?;
    let h = 1.0 / n as f64;
    let mut worst = 0.0_f64;
    for m in -4i64..=4 {
        for k in -4i64..=4 {
            let lam = tau.flat_eigenvalue(m, k);
            for phase in [0.0, 0.5 * PI] {
                let u: Vec<f64> = (0..n * n)
                    .map(|i| (2.0 * PI * (m as f64 * (i % n) as f64 * h + k as f64 * (i / n) as f64 * h) + phase).cos())
                    .collect();
                let out = flat_laplacian(&u, tau)?;
                let err = out.iter().zip(&u).map(|(o, v)| (o + lam * v).abs()).fold(0.0, f64::max);
                worst = worst.max(err / lam.max(1.0));
            }
        }
    }
    Ok(check("laplacian_symbol", worst, 1e-10))
}

fn laplacian_mean_zero(metrics: &[ConformalMetric]) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    for m in metrics {
        let out = flat_laplacian(m.u(), m.tau())?;
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let max = out.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        worst = worst.max(mean.abs() / max);
    }
    Ok(check("laplacian_mean_zero", worst, 1e-12))
}

fn curvature_shift(metrics: &[ConformalMetric]) -> CheckResult {
    let c = 0.37;
    let worst = metrics
        .iter()
        .map(|m| {
            let a = m.scalar_curvature().r;
            let b = m.shifted(c).scalar_curvature().r;
            let scale = a.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
            a.iter().zip(&b).map(|(x, y)| ((-c).exp() * x - y).abs()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max);
    check("curvature_shift_covariance", worst, 1e-12)
}

fn volume_normalization(metrics: &[ConformalMetric]) -> CheckResult {
    let worst = metrics
        .iter()
        .map(|m| {
            let scaled = ConformalMetric::new(m.n(), m.tau(), m.u().to_vec(), 3.5).unwrap().normalize_volume();
            (scaled.volume() / 3.5 - 1.0).abs()
        })
        .fold(0.0, f64::max);
    check("volume_normalization", worst, 1e-12)
}

fn flat_spectrum() -> Result<CheckResult> {
    let m = ConformalMetric::flat(16, TorusModulus::SQUARE, 1.0)?;
    let s = eigenvalues(&m, 8)?;
    let l = 4.0 * PI * PI;
    let want = [l, l, l, l, 2.0 * l, 2.0 * l, 2.0 * l, 2.0 * l];
    let worst = s.eigenvalues[1..].iter().zip(want).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    Ok(check("flat_spectrum", worst, 1e-8))
}

fn scaling_law(metrics: &[ConformalMetric]) -> CheckResult {
    let c = -0.8;
    let mut worst = (flat_logdet(TorusModulus::SQUARE, 2.0) - flat_logdet(TorusModulus::SQUARE, 1.0) - 2f64.ln()).abs();
    for m in metrics.iter().take(5) {
        worst = worst.max((polyakov_logdet(&m.shifted(c)) - polyakov_logdet(m) - c).abs());
    }
    check("logdet_scaling", worst, 1e-12)
}

fn modular_invariance() -> Result<CheckResult> {
    let tau = TorusModulus::new(0.3, 1.7)?;
    let base = flat_logdet(tau, 1.0);
    let images = [tau.s_transform(), tau.t_transform(), tau.t_transform().s_transform()];
    let worst = images.iter().map(|t| (flat_logdet(*t, 1.0) - base).abs()).fold(0.0, f64::max);
    Ok(check("modular_invariance", worst, 1e-12))
}

fn rate_identity(runs: &[Trajectory], scale: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    for traj in runs {
        for r in &traj.samples {
            let rate = scale * RATE_COEFFICIENT * r.volume * r.var_r;
            if let Some(fd) = r.rate_fd {
                if rate > 1e-6 {
                    worst = worst.max((fd - rate).abs() / rate);
                }
            }
        }
    }
    check("rate_identity", worst, 1e-3)
}

fn monotone(runs: &[Trajectory]) -> Result<CheckResult> {
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for traj in runs {
        let rep = monotonicity_certificate(traj, 1e-9)?;
        min_slack = min_slack.min(rep.min_slack);
        if !rep.passed {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "monotonicity_certificate",
        passed: failures == 0,
        detail: format!("{failures} of {} runs failed, min slack {min_slack:.3e}", runs.len()),
    })
}

fn volume_drift(runs: &[Trajectory]) -> CheckResult {
    let worst = runs
        .iter()
        .flat_map(|t| {
            let v0 = t.samples[0].volume;
            t.samples.iter().map(move |r| (r.volume / v0 - 1.0).abs())
        })
        .fold(0.0, f64::max);
    check("volume_drift", worst, 1e-10)
}

fn equality_case(runs: &[Trajectory]) -> CheckResult {
    let worst = runs
        .iter()
        .map(|t| {
            let m = &t.final_state.metric;
            let c = m.scalar_curvature();
            let rho: Vec<f64> = m.u().iter().map(|v| v.exp()).collect();
            let r2 = m.tau().im() * c.r.iter().zip(&rho).map(|(r, p)| r * r * p).sum::<f64>() / rho.len() as f64;
            cauchy_gap(m) / (1.0 + r2)
        })
        .fold(0.0, f64::max);
    check("equality_case", worst, 1e-14)
}

pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let corpus = match &opts.corpus {
        Some(dir) => load_corpus(dir)?,
        None => default_corpus(),
    };
    let metrics = random_metrics(20)?;
    let runs = par::map(&corpus, |cfg| -> Result<Trajectory> { evolve(&cfg.initial_metric()?, &cfg.flow) })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![
        gauss_bonnet(&metrics),
        laplacian_symbol()?,
        laplacian_mean_zero(&metrics)?,
        curvature_shift(&metrics),
        volume_normalization(&metrics),
        flat_spectrum()?,
        scaling_law(&metrics),
        modular_invariance()?,
        rate_identity(&runs, opts.rate_coefficient_scale),
        monotone(&runs)?,
        volume_drift(&runs),
        equality_case(&runs),
    ];
    let stationary = runs.iter().filter(|t| t.termination == crate::flow::Termination::Stationary).count();
    out.push(CheckResult {
        name: "corpus_converged",
        passed: stationary == runs.len(),
        detail: format!("{stationary} of {} runs stationary", runs.len()),
    });
    Ok(out)
}
