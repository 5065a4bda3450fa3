//! Normalized Ricci flow d/dt u = R0 - R for u = log rho.
//!
//! Explicit classical RK4 under a parabolic step cap, with an optional
//! constant shift of u after each step that restores the target volume.

use serde::{Deserialize, Serialize};

use crate::analysis::variance_from;
use crate::error::{Error, Result};
use crate::geometry::{ConformalMetric, MetricAnalysis};
use crate::spectral::{polyakov_from, RATE_COEFFICIENT};

/// Stability constant of the cap; equals h^2/4 per unit safety on the square
/// torus, where the largest grid symbol is 2 pi^2 n^2.
const CFL_SCALE: f64 = std::f64::consts::PI * std::f64::consts::PI / 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub t_max: f64,
    pub cfl_safety: f64,
    pub tol_stationary: f64,
    pub record_every: usize,
    pub renormalize_volume: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { t_max: 2.0, cfl_safety: 0.25, tol_stationary: 1e-8, record_every: 1, renormalize_volume: true }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::config("flow.t_max", format!("must be positive, got {}", self.t_max)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config("flow.cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.tol_stationary > 0.0) {
            return Err(Error::config("flow.tol_stationary", format!("must be positive, got {}", self.tol_stationary)));
        }
        if self.record_every == 0 {
            return Err(Error::config("flow.record_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// One recorded sample of a flow run.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    pub dt: f64,
    pub volume: f64,
    pub r0: f64,
    pub sup_resid: f64,
    /// Variance of R under dmu / V.
    pub var_r: f64,
    pub logdet_polyakov: f64,
    pub rate_formula: f64,
    /// Centered finite difference of `logdet_polyakov`; absent at the ends.
    pub rate_fd: Option<f64>,
    pub gb_defect: f64,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub metric: ConformalMetric,
    pub last_dt: f64,
    /// sup |R - R0|
    pub residual: f64,
    /// Accepted steps so far.
    pub steps: usize,
    analysis: MetricAnalysis,
}

impl FlowState {
    pub fn new(metric: ConformalMetric) -> Self {
        let analysis = metric.analyze();
        let residual = sup_deviation(&analysis);
        FlowState { t: 0.0, metric, last_dt: 0.0, residual, steps: 0, analysis }
    }

    pub fn diagnostics(&self) -> DiagnosticRow {
        let a = &self.analysis;
        let var_r = variance_from(a);
        DiagnosticRow {
            t: self.t,
            dt: self.last_dt,
            volume: a.volume,
            r0: a.r0,
            sup_resid: self.residual,
            var_r,
            logdet_polyakov: polyakov_from(self.metric.tau(), a),
            rate_formula: RATE_COEFFICIENT * a.volume * var_r,
            rate_fd: None,
            gb_defect: a.total_curvature - crate::geometry::GAUSS_BONNET_TARGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Stationary,
    TimeLimit,
    StepUnderflow,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<DiagnosticRow>,
    pub final_state: FlowState,
    pub termination: Termination,
    /// The error that cut the run short, if any.
    pub abort: Option<String>,
}

fn sup_deviation(a: &MetricAnalysis) -> f64 {
    a.r.iter().fold(0.0_f64, |acc, r| acc.max((r - a.r0).abs()))
}

fn rhs_from(a: &MetricAnalysis) -> Vec<f64> {
    a.r.iter().map(|r| a.r0 - r).collect()
}

/// R0 - R on the grid.
pub fn rhs(m: &ConformalMetric) -> Vec<f64> {
    rhs_from(&m.analyze())
}

/// sup |R - R0|.
pub fn stationarity_residual(m: &ConformalMetric) -> f64 {
    sup_deviation(&m.analyze())
}

/// Explicit step cap safety * min(rho) * (pi^2 / 2) / lambda_max, where
/// lambda_max is the largest flat symbol on the grid. On the square torus
/// this is safety * h^2 * min(rho) / 4.
pub fn cfl_dt(m: &ConformalMetric, safety: f64) -> f64 {
    let min_rho = m.u().iter().fold(f64::INFINITY, |acc, v| acc.min(v.exp()));
    safety * min_rho * CFL_SCALE / m.operator().lambda_max()
}

fn stage_rhs(template: &ConformalMetric, u: &[f64]) -> Vec<f64> {
    // Stage fields are validated only at the end of the step.
    let op = template.operator();
    let mut lap = vec![0.0; u.len()];
    op.laplacian_and_energy(u, &mut lap);
    let mut r = Vec::with_capacity(u.len());
    let (mut vol, mut tot) = (0.0, 0.0);
    for (l, v) in lap.iter().zip(u) {
        let rho = v.exp();
        r.push(-l / rho);
        vol += rho;
        tot -= l;
    }
    let r0 = tot / vol;
    r.iter().map(|r| r0 - r).collect()
}

/// One classical RK4 step of length `dt`.
pub fn step(s: &FlowState, dt: f64, cfg: &FlowConfig) -> Result<FlowState> {
    if !(dt >= 1e-16 * cfg.t_max) {
        return Err(Error::StepUnderflow { dt, t_max: cfg.t_max });
    }
    let u = s.metric.u();
    let k1 = rhs_from(&s.analysis);
    let axpy = |k: &[f64], h: f64| -> Vec<f64> { u.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k2 = stage_rhs(&s.metric, &axpy(&k1, 0.5 * dt));
    let k3 = stage_rhs(&s.metric, &axpy(&k2, 0.5 * dt));
    let k4 = stage_rhs(&s.metric, &axpy(&k3, dt));
    let w = dt / 6.0;
    let next: Vec<f64> = (0..u.len()).map(|i| u[i] + w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    let t = s.t + dt;
    let fail = || Error::NonFiniteStep { step: s.steps + 1, t };
    let mut metric = s.metric.with_field(next).map_err(|_| fail())?;
    if cfg.renormalize_volume {
        metric.normalize_in_place();
        if metric.u().iter().any(|v| !v.is_finite()) {
            return Err(fail());
        }
    }
    let analysis = metric.analyze();
    let residual = sup_deviation(&analysis);
    if !residual.is_finite() {
        return Err(fail());
    }
    Ok(FlowState { t, metric, last_dt: dt, residual, steps: s.steps + 1, analysis })
}

/// Fills `rate_fd` with the three-point derivative on the (possibly uneven)
/// sample times.
pub fn fill_rate_fd(samples: &mut [DiagnosticRow]) {
    let len = samples.len();
    for k in 1..len.saturating_sub(1) {
        let (a, b, c) = (&samples[k - 1], &samples[k], &samples[k + 1]);
        let hm = b.t - a.t;
        let hp = c.t - b.t;
        let d = (hm * hm * (c.logdet_polyakov - b.logdet_polyakov) + hp * hp * (b.logdet_polyakov - a.logdet_polyakov))
            / (hm * hp * (hm + hp));
        samples[k].rate_fd = Some(d);
    }
}

/// Runs the flow until the residual drops below `tol_stationary` or the time
/// limit is reached.
pub fn evolve(m: &ConformalMetric, cfg: &FlowConfig) -> Result<Trajectory> {
    evolve_with(m, cfg, |_| Ok(()))
}

/// [`evolve`] that also hands every recorded state to `on_sample`; an error
/// from the callback ends the run and is returned.
pub fn evolve_with<F>(m: &ConformalMetric, cfg: &FlowConfig, mut on_sample: F) -> Result<Trajectory>
where
    F: FnMut(&FlowState) -> Result<()>,
{
    cfg.validate()?;
    let start = if cfg.renormalize_volume { m.normalize_volume() } else { m.clone() };
    let mut state = FlowState::new(start);
    on_sample(&state)?;
    let mut samples = vec![state.diagnostics()];
    let mut abort = None;
    let termination = loop {
        if state.residual < cfg.tol_stationary {
            break Termination::Stationary;
        }
        let remaining = cfg.t_max - state.t;
        if remaining <= 1e-12 * cfg.t_max {
            break Termination::TimeLimit;
        }
        let dt = cfl_dt(&state.metric, cfg.cfl_safety).min(remaining);
        match step(&state, dt, cfg) {
            Ok(next) => state = next,
            Err(e) => {
                abort = Some(e.to_string());
                break Termination::StepUnderflow;
            }
        }
        if state.steps.is_multiple_of(cfg.record_every) {
            on_sample(&state)?;
            samples.push(state.diagnostics());
        }
    };
    if samples.last().map(|s| s.t) != Some(state.t) {
        on_sample(&state)?;
        samples.push(state.diagnostics());
    }
    fill_rate_fd(&mut samples);
    Ok(Trajectory { samples, final_state: state, termination, abort })
}
