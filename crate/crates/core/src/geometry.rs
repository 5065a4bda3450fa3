//! Conformal metrics rho |dz|^2 on the torus C/(Z + tau Z).
//!
//! Conventions: u = log rho, R = -(1/rho) Lap0 u with Lap0 = d_xx + d_yy in
//! the conformal coordinate, dmu = rho dx dy. Gauss-Bonnet then reads
//! int R dmu = 8 pi (1 - g), which is zero here since the genus is 1.
//! Grid integrals over the unit square carry the Jacobian Im tau.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{flat_operator, FlatOperator};

/// Genus of every surface handled by this crate.
pub const GENUS: u32 = 1;

/// Gauss-Bonnet target 8 pi (1 - g).
pub const GAUSS_BONNET_TARGET: f64 = 8.0 * PI * (1.0 - GENUS as f64);

/// Modulus tau of the lattice Z + tau Z; fixes the conformal class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TorusModulus {
    re: f64,
    im: f64,
}

impl TorusModulus {
    pub const SQUARE: TorusModulus = TorusModulus { re: 0.0, im: 1.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() {
            return Err(Error::NonFinite { what: "Re tau", index: 0 });
        }
        if !(im > 0.0) || !im.is_finite() {
            return Err(Error::InvalidModulus { im });
        }
        Ok(TorusModulus { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    /// tau -> -1/tau
    pub fn s_transform(&self) -> Self {
        let d = self.re * self.re + self.im * self.im;
        TorusModulus { re: -self.re / d, im: self.im / d }
    }

    /// tau -> tau + 1
    pub fn t_transform(&self) -> Self {
        TorusModulus { re: self.re + 1.0, im: self.im }
    }

    /// Flat Laplace eigenvalue (4 pi^2 / Im tau^2) |m tau - k|^2 of the mode
    /// e^{2 pi i (m x + k y)}.
    pub fn flat_eigenvalue(&self, m: i64, k: i64) -> f64 {
        crate::fourier::flat_eigenvalue(m as f64, k as f64, self.re, self.im)
    }
}

impl TryFrom<[f64; 2]> for TorusModulus {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        TorusModulus::new(v[0], v[1])
    }
}

impl From<TorusModulus> for [f64; 2] {
    fn from(t: TorusModulus) -> Self {
        [t.re, t.im]
    }
}

/// Side length of a square grid stored in `len` values, if valid.
pub(crate) fn grid_side(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len || n < 8 {
        return Err(Error::InvalidGrid { n, len });
    }
    Ok(n)
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// Flat Laplacian of the |dz|^2 metric applied to a periodic n x n grid.
pub fn flat_laplacian(u: &[f64], tau: TorusModulus) -> Result<Vec<f64>> {
    let n = grid_side(u.len())?;
    check_finite(u, "grid")?;
    let op = flat_operator(n, tau.re, tau.im);
    let mut out = vec![0.0; u.len()];
    op.laplacian_and_energy(u, &mut out);
    Ok(out)
}

/// A conformal metric e^u |dz|^2 sampled on the collocation grid.
///
/// The modulus is fixed at construction; every derived metric keeps it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalMetric {
    n: usize,
    tau: TorusModulus,
    u: Vec<f64>,
    volume_target: f64,
}

/// Scalar curvature on the grid with its measured mean.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    pub r: Vec<f64>,
    pub r0: f64,
    /// int R dmu - 8 pi (1 - g)
    pub gb_defect: f64,
}

/// Everything one forward/inverse transform pair of u yields.
#[derive(Clone, Debug)]
pub(crate) struct MetricAnalysis {
    pub rho: Vec<f64>,
    pub r: Vec<f64>,
    pub r0: f64,
    pub volume: f64,
    pub total_curvature: f64,
    pub dirichlet_energy: f64,
}

impl ConformalMetric {
    pub fn new(n: usize, tau: TorusModulus, u: Vec<f64>, volume_target: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() || u.len() != n * n {
            return Err(Error::InvalidGrid { n, len: u.len() });
        }
        check_finite(&u, "u")?;
        if !(volume_target > 0.0) || !volume_target.is_finite() {
            return Err(Error::config("volume_target", format!("must be positive, got {volume_target}")));
        }
        Ok(ConformalMetric { n, tau, u, volume_target })
    }

    /// The flat metric of the given volume (u constant).
    pub fn flat(n: usize, tau: TorusModulus, volume_target: f64) -> Result<Self> {
        let c = (volume_target / tau.im).ln();
        Self::new(n, tau, vec![c; n * n], volume_target)
    }

    /// Builds u from a closure of the unit-square coordinates (x, y).
    pub fn from_fn<F>(n: usize, tau: TorusModulus, volume_target: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let h = 1.0 / n as f64;
        let u = (0..n * n).map(|i| f((i % n) as f64 * h, (i / n) as f64 * h)).collect();
        Self::new(n, tau, u, volume_target)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> TorusModulus {
        self.tau
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn volume_target(&self) -> f64 {
        self.volume_target
    }

    /// Same grid, modulus and target with a new log-conformal factor.
    pub fn with_field(&self, u: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.tau, u, self.volume_target)
    }

    /// u + c, i.e. rho scaled by e^c.
    pub fn shifted(&self, c: f64) -> Self {
        ConformalMetric { u: self.u.iter().map(|v| v + c).collect(), ..self.clone() }
    }

    pub(crate) fn operator(&self) -> std::sync::Arc<FlatOperator> {
        flat_operator(self.n, self.tau.re, self.tau.im)
    }

    pub(crate) fn analyze(&self) -> MetricAnalysis {
        let op = self.operator();
        let nn = (self.n * self.n) as f64;
        let mut lap = vec![0.0; self.u.len()];
        let dirichlet_energy = op.laplacian_and_energy(&self.u, &mut lap);
        let rho: Vec<f64> = self.u.iter().map(|v| v.exp()).collect();
        let r: Vec<f64> = lap.iter().zip(&rho).map(|(l, p)| -l / p).collect();
        let volume = self.tau.im * rho.iter().sum::<f64>() / nn;
        let total_curvature = self.tau.im * r.iter().zip(&rho).map(|(r, p)| r * p).sum::<f64>() / nn;
        MetricAnalysis { rho, r, r0: total_curvature / volume, volume, total_curvature, dirichlet_energy }
    }

    /// R = -e^{-u} Lap0 u with its dmu-mean and Gauss-Bonnet residual.
    pub fn scalar_curvature(&self) -> CurvatureField {
        let a = self.analyze();
        CurvatureField { r: a.r, r0: a.r0, gb_defect: a.total_curvature - GAUSS_BONNET_TARGET }
    }

    /// Im tau * mean(e^u).
    pub fn volume(&self) -> f64 {
        let s: f64 = self.u.iter().map(|v| v.exp()).sum();
        self.tau.im * s / (self.n * self.n) as f64
    }

    /// R0 = int R dmu / int dmu.
    pub fn mean_curvature(&self) -> f64 {
        self.analyze().r0
    }

    /// Dirichlet energy int |grad u|^2 dA of the flat metric.
    pub fn dirichlet_energy(&self) -> f64 {
        let mut lap = vec![0.0; self.u.len()];
        self.operator().laplacian_and_energy(&self.u, &mut lap)
    }

    /// Shifts u by the constant that puts the volume at `volume_target`.
    pub fn normalize_volume(&self) -> Self {
        let shift = (self.volume_target / self.volume()).ln();
        self.shifted(shift)
    }

    pub(crate) fn normalize_in_place(&mut self) {
        let shift = (self.volume_target / self.volume()).ln();
        self.u.iter_mut().for_each(|v| *v += shift);
    }
}
