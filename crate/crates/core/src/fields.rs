//! Initial log-conformal factors: flat, single Fourier modes and seeded
//! band-limited random fields.
//!
//! Random fields use ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). For
//! every mode (m, k) with |m|, |k| <= B, (m, k) != (0, 0), taken from the
//! half plane m > 0 or (m = 0, k > 0) in the order m = 0..=B, k = -B..=B, two
//! uniform draws on [-1, 1) give the cosine and sine coefficients. The sum is
//! then rescaled so that max |u| over the grid equals the amplitude.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConformalMetric, TorusModulus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialField {
    Flat,
    Mode { m: i64, k: i64, amplitude: f64 },
    Random { seed: u64, bandlimit: usize, amplitude: f64 },
}

fn trig_tables(n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|i| {
            let (s, c) = (2.0 * PI * i as f64 / n as f64).sin_cos();
            (c, s)
        })
        .unzip()
}

fn phase_index(m: i64, k: i64, j: usize, l: usize, n: usize) -> usize {
    (m * j as i64 + k * l as i64).rem_euclid(n as i64) as usize
}

/// amplitude * cos(2 pi (m x + k y)) on the n x n grid.
pub fn mode_field(n: usize, m: i64, k: i64, amplitude: f64) -> Vec<f64> {
    let (cos, _) = trig_tables(n);
    (0..n * n).map(|i| amplitude * cos[phase_index(m, k, i % n, i / n, n)]).collect()
}

/// Seeded band-limited field with sup-norm `amplitude`.
pub fn random_field(n: usize, seed: u64, bandlimit: usize, amplitude: f64) -> Result<Vec<f64>> {
    if bandlimit == 0 || 2 * bandlimit >= n {
        return Err(Error::config("init.bandlimit", format!("must be in 1..{} for n = {n}", n / 2)));
    }
    let b = bandlimit as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for m in 0..=b {
        for k in -b..=b {
            if m == 0 && k <= 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let s: f64 = rng.gen_range(-1.0..1.0);
            modes.push((m, k, a, s));
        }
    }
    let (cos, sin) = trig_tables(n);
    let mut u = vec![0.0; n * n];
    for (i, v) in u.iter_mut().enumerate() {
        let (j, l) = (i % n, i / n);
        *v = modes
            .iter()
            .map(|&(m, k, a, s)| {
                let p = phase_index(m, k, j, l, n);
                a * cos[p] + s * sin[p]
            })
            .sum();
    }
    let sup = u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
    u.iter_mut().for_each(|v| *v *= scale);
    Ok(u)
}

impl InitialField {
    pub fn field(&self, n: usize) -> Result<Vec<f64>> {
        match *self {
            InitialField::Flat => Ok(vec![0.0; n * n]),
            InitialField::Mode { m, k, amplitude } => Ok(mode_field(n, m, k, amplitude)),
            InitialField::Random { seed, bandlimit, amplitude } => random_field(n, seed, bandlimit, amplitude),
        }
    }

    /// Volume-normalized metric with this initial field.
    pub fn metric(&self, n: usize, tau: TorusModulus, volume_target: f64) -> Result<ConformalMetric> {
        Ok(ConformalMetric::new(n, tau, self.field(n)?, volume_target)?.normalize_volume())
    }
}
