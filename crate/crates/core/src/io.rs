//! Run configs, metric snapshots and CSV tables.
//!
//! Reals are written as IEEE-754 doubles in scientific notation with 17
//! significant digits, so every file parses back to the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use crate::flow::DiagnosticRow;

use crate::analysis::SweepResult;
use crate::error::{Error, Result};
use crate::fields::InitialField;
use crate::flow::FlowConfig;
use crate::geometry::{ConformalMetric, TorusModulus};

pub const DIAGNOSTIC_HEADER: &str = "t,dt,volume,R0,sup_resid,var_R,logdet_polyakov,rate_formula,rate_fd,gb_defect";
pub const SWEEP_HEADER: &str = "eps,logdet,delta_vs_flat";

/// 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Flat,
    Mode,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub kind: InitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandlimit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetSpec {
    #[serde(rename = "K", default = "default_modes")]
    pub k: usize,
    #[serde(default)]
    pub zeta_route: bool,
}

fn default_modes() -> usize {
    400
}

impl Default for DetSpec {
    fn default() -> Self {
        DetSpec { k: default_modes(), zeta_route: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid_n: usize,
    pub tau: [f64; 2],
    #[serde(default = "unit")]
    pub volume_target: f64,
    pub init: InitSpec,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub det: DetSpec,
}

fn unit() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn modulus(&self) -> Result<TorusModulus> {
        TorusModulus::new(self.tau[0], self.tau[1]).map_err(|_| match self.tau[1] {
            im if !(im > 0.0) => Error::config("tau[1]", format!("Im tau must be positive, got {im}")),
            _ => Error::config("tau", "entries must be finite"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid_n;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config("grid_n", format!("must be a power of two >= 8, got {n}")));
        }
        self.modulus()?;
        if !(self.volume_target > 0.0) || !self.volume_target.is_finite() {
            return Err(Error::config("volume_target", format!("must be positive, got {}", self.volume_target)));
        }
        self.initial_field()?;
        self.flow.validate()?;
        if self.det.k == 0 || (self.det.zeta_route && self.det.k + 1 > n * n / 4) {
            return Err(Error::config("det.K", format!("must lie in 1..{} for grid_n = {n}", n * n / 4)));
        }
        Ok(())
    }

    pub fn initial_field(&self) -> Result<InitialField> {
        let init = &self.init;
        if !init.amplitude.is_finite() {
            return Err(Error::config("init.amplitude", "must be finite"));
        }
        Ok(match init.kind {
            InitKind::Flat => InitialField::Flat,
            InitKind::Mode => {
                let [m, k] = init.mode.ok_or_else(|| Error::config("init.mode", "required for kind \"mode\""))?;
                if m == 0 && k == 0 {
                    return Err(Error::config("init.mode", "must not be [0, 0]"));
                }
                InitialField::Mode { m, k, amplitude: init.amplitude }
            }
            InitKind::Random => {
                let seed = init.seed.ok_or_else(|| Error::config("init.seed", "required for kind \"random\""))?;
                let bandlimit = init.bandlimit.unwrap_or(self.grid_n / 8);
                if bandlimit == 0 || 2 * bandlimit >= self.grid_n {
                    return Err(Error::config("init.bandlimit", format!("must lie in 1..{}", self.grid_n / 2)));
                }
                InitialField::Random { seed, bandlimit, amplitude: init.amplitude }
            }
        })
    }

    /// Volume-normalized initial metric.
    pub fn initial_metric(&self) -> Result<ConformalMetric> {
        self.initial_field()?.metric(self.grid_n, self.modulus()?, self.volume_target)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotFile {
    n: usize,
    tau: [f64; 2],
    volume_target: f64,
    u: Vec<f64>,
}

pub fn snapshot_to_string(m: &ConformalMetric) -> String {
    let mut s = String::with_capacity(m.u().len() * 26 + 96);
    let tau = m.tau();
    let _ = write!(
        s,
        "{{\"n\":{},\"tau\":[{},{}],\"volume_target\":{},\"u\":[",
        m.n(),
        fmt_real(tau.re()),
        fmt_real(tau.im()),
        fmt_real(m.volume_target())
    );
    for (i, v) in m.u().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&fmt_real(*v));
    }
    s.push_str("]}\n");
    s
}

pub fn snapshot_from_str(text: &str, path: &Path) -> Result<ConformalMetric> {
    let bad = |reason: String| Error::Parse { path: path.to_path_buf(), reason };
    let f: SnapshotFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if f.u.len() != f.n * f.n {
        return Err(bad(format!("u has {} values, expected n*n = {}", f.u.len(), f.n * f.n)));
    }
    let tau = TorusModulus::new(f.tau[0], f.tau[1])?;
    ConformalMetric::new(f.n, tau, f.u, f.volume_target)
}

pub fn write_snapshot(path: &Path, m: &ConformalMetric) -> Result<()> {
    fs::write(path, snapshot_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<ConformalMetric> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    snapshot_from_str(&text, path)
}

pub fn diagnostics_to_csv(rows: &[DiagnosticRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 260 + 100);
    s.push_str(DIAGNOSTIC_HEADER);
    s.push('\n');
    for r in rows {
        let fd = r.rate_fd.map(fmt_real).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_real(r.t),
            fmt_real(r.dt),
            fmt_real(r.volume),
            fmt_real(r.r0),
            fmt_real(r.sup_resid),
            fmt_real(r.var_r),
            fmt_real(r.logdet_polyakov),
            fmt_real(r.rate_formula),
            fd,
            fmt_real(r.gb_defect)
        );
    }
    s
}

pub fn diagnostics_from_csv(text: &str, path: &Path) -> Result<Vec<DiagnosticRow>> {
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == DIAGNOSTIC_HEADER => {}
        _ => return Err(bad(1, "unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(i + 2, format!("expected 10 fields, got {}", f.len())));
        }
        let num = |j: usize| f[j].parse::<f64>().map_err(|e| bad(i + 2, format!("field {}: {e}", j + 1)));
        rows.push(DiagnosticRow {
            t: num(0)?,
            dt: num(1)?,
            volume: num(2)?,
            r0: num(3)?,
            sup_resid: num(4)?,
            var_r: num(5)?,
            logdet_polyakov: num(6)?,
            rate_formula: num(7)?,
            rate_fd: if f[8].is_empty() { None } else { Some(num(8)?) },
            gb_defect: num(9)?,
        });
    }
    Ok(rows)
}

pub fn sweep_to_csv(r: &SweepResult) -> String {
    let mut s = String::new();
    s.push_str(SWEEP_HEADER);
    s.push('\n');
    for row in &r.rows {
        let _ = writeln!(s, "{},{},{}", fmt_real(row.eps), fmt_real(row.logdet), fmt_real(row.delta_vs_flat));
    }
    let _ = writeln!(s, "# c = {}", fmt_real(r.quadratic_coefficient));
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
