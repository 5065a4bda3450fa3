//! Fourier collocation on the periodic unit-square grid.
//!
//! A field on the torus C/(Z + tau Z) is sampled at x_j = j/n, y_k = k/n with
//! z = x + tau*y and stored row-major with one row per y value. The flat
//! Laplacian of |dz|^2 is diagonal on e^{2 pi i (m x + k y)} with symbol
//! -(4 pi^2 / Im tau^2) |m tau - k|^2.
//!
//! Spectra are kept in transposed order (`m_index * n + k_index`), which
//! saves the two transposes a round trip would otherwise need.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

pub(crate) struct FlatOperator {
    n: usize,
    im_tau: f64,
    symbol: Vec<f64>,
    lambda_max: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

type CacheKey = (usize, u64, u64);

static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<FlatOperator>>>> = OnceLock::new();

/// Shared operator for grid size `n` and modulus `(re, im)`.
pub(crate) fn flat_operator(n: usize, re: f64, im: f64) -> Arc<FlatOperator> {
    let key = (n, re.to_bits(), im.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(key).or_insert_with(|| Arc::new(FlatOperator::new(n, re, im))).clone()
}

/// Signed wavenumber of FFT index `j` on an `n`-point axis.
pub(crate) fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// (4 pi^2 / Im tau^2) |m tau - k|^2.
pub(crate) fn flat_eigenvalue(m: f64, k: f64, re: f64, im: f64) -> f64 {
    let a = m * re - k;
    let b = m * im;
    4.0 * PI * PI * (a * a + b * b) / (im * im)
}

impl FlatOperator {
    fn new(n: usize, re: f64, im: f64) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let half = (n / 2) as i64;
        // At the Nyquist index both signs alias onto one sample; averaging the
        // two symbols keeps the multiplier even, so real fields stay real.
        let aliases = |w: i64| -> Vec<f64> {
            if w == -half {
                vec![-half as f64, half as f64]
            } else {
                vec![w as f64]
            }
        };
        let mut symbol = vec![0.0; n * n];
        for jm in 0..n {
            let ms = aliases(wavenumber(jm, n));
            for jk in 0..n {
                let ks = aliases(wavenumber(jk, n));
                let mut acc = 0.0;
                for &m in &ms {
                    for &k in &ks {
                        acc += flat_eigenvalue(m, k, re, im);
                    }
                }
                symbol[jm * n + jk] = acc / (ms.len() * ks.len()) as f64;
            }
        }
        let lambda_max = symbol.iter().cloned().fold(0.0, f64::max);
        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(n);
        let c2r = real_planner.plan_fft_inverse(n);
        FlatOperator { n, im_tau: im, symbol, lambda_max, fwd, inv, r2c, c2r }
    }

    /// Largest symbol magnitude on the grid.
    pub(crate) fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                buf.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Unnormalized forward transform of a complex grid, in place.
    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        self.transpose(buf);
        self.fwd.process(buf);
    }

    /// Inverse transform including the 1/n^2 factor, in place.
    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        self.transpose(buf);
        self.inv.process(buf);
        let scale = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// Fourier coefficients c_k with f = sum c_k e_k (already divided by n^2).
    #[cfg(test)]
    pub(crate) fn coefficients(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        let scale = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Applies the Fourier multiplier `g(lambda)` to one or two real fields
    /// at once (the second rides in the imaginary part).
    pub(crate) fn apply_multiplier<G>(
        &self,
        a: &[f64],
        b: Option<&[f64]>,
        g: G,
        out_a: &mut [f64],
        out_b: Option<&mut [f64]>,
    ) where
        G: Fn(f64) -> f64,
    {
        let mut buf: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        self.forward_in_place(&mut buf);
        for (c, &lam) in buf.iter_mut().zip(&self.symbol) {
            *c *= g(lam);
        }
        self.inverse_in_place(&mut buf);
        for (o, c) in out_a.iter_mut().zip(&buf) {
            *o = c.re;
        }
        if let Some(out_b) = out_b {
            for (o, c) in out_b.iter_mut().zip(&buf) {
                *o = c.im;
            }
        }
    }

    /// Flat Laplacian of `u` together with the Dirichlet energy
    /// Im tau * sum lambda_k |c_k|^2 = integral of |grad u|^2 over the torus.
    ///
    /// Uses a real transform along x, so only the slots m_index <= n/2 of the
    /// transposed spectrum are formed; the rest follow by conjugate symmetry.
    pub(crate) fn laplacian_and_energy(&self, u: &[f64], lap: &mut [f64]) -> f64 {
        let n = self.n;
        let h = n / 2 + 1;
        let mut row = vec![0.0; n];
        let mut half = vec![Complex64::new(0.0, 0.0); h];
        // spec[m_index * n + k_index] for m_index in 0..h
        let mut spec = vec![Complex64::new(0.0, 0.0); h * n];
        for k in 0..n {
            row.copy_from_slice(&u[k * n..(k + 1) * n]);
            self.r2c.process(&mut row, &mut half).expect("buffer sizes match the plan");
            for (m, c) in half.iter().enumerate() {
                spec[m * n + k] = *c;
            }
        }
        let nn = (n * n) as f64;
        let mut energy = 0.0;
        let scratch_len = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        for (m, line) in spec.chunks_exact_mut(n).enumerate() {
            self.fwd.process_with_scratch(line, &mut scratch);
            let weight = if m == 0 || m == n / 2 { 1.0 } else { 2.0 };
            let sym = &self.symbol[m * n..(m + 1) * n];
            let mut e = 0.0;
            for (c, &lam) in line.iter_mut().zip(sym) {
                e += lam * c.norm_sqr();
                *c *= -lam / nn;
            }
            energy += weight * e;
            self.inv.process_with_scratch(line, &mut scratch);
        }
        for k in 0..n {
            for (m, c) in half.iter_mut().enumerate() {
                *c = spec[m * n + k];
            }
            // Roundoff can leave tiny imaginary parts on the self-conjugate bins.
            half[0].im = 0.0;
            half[h - 1].im = 0.0;
            self.c2r.process(&mut half, &mut lap[k * n..(k + 1) * n]).expect("buffer sizes match the plan");
        }
        self.im_tau * energy / (nn * nn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_wrap() {
        let ks: Vec<i64> = (0..8).map(|j| wavenumber(j, 8)).collect();
        assert_eq!(ks, [0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn symbol_is_even_under_negation() {
        let op = FlatOperator::new(16, 0.37, 1.3);
        let n = 16;
        for jm in 0..n {
            for jk in 0..n {
                let a = op.symbol[jm * n + jk];
                let b = op.symbol[((n - jm) % n) * n + (n - jk) % n];
                assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }

    #[test]
    fn round_trip_recovers_field() {
        let op = flat_operator(8, 0.0, 1.0);
        let field: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; 64];
        op.apply_multiplier(&field, None, |_| 1.0, &mut out, None);
        for (a, b) in field.iter().zip(&out) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn real_laplacian_matches_complex_path() {
        let n = 16;
        let op = FlatOperator::new(n, 0.41, 0.83);
        // pseudo-random field with content up to the Nyquist index
        let field: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 104729) as f64 / 104729.0 - 0.5).collect();
        let mut fast = vec![0.0; n * n];
        let energy = op.laplacian_and_energy(&field, &mut fast);
        let mut slow = vec![0.0; n * n];
        op.apply_multiplier(&field, None, |lam| -lam, &mut slow, None);
        let scale = slow.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        // energy = -Im tau * mean(u * lap u)
        let pairing: f64 = field.iter().zip(&slow).map(|(u, l)| u * l).sum::<f64>() / (n * n) as f64;
        assert!((energy + op.im_tau * pairing).abs() <= 1e-12 * energy);
    }
}
