//! Low end of the spectrum of the symmetrized weighted Laplacian
//! A = e^{-u/2} (-Lap0) e^{-u/2}, whose eigenvalues are those of
//! -Lap0 phi = lambda e^u phi with phi = e^{-u/2} psi.
//!
//! A has the one-dimensional kernel spanned by e^{u/2}. The solver runs a
//! block Krylov iteration with full reorthogonalization on the
//! pseudo-inverse of A (applied with two transforms per pair of vectors), so
//! the small nonzero eigenvalues of A become the dominant ones. Ritz pairs are
//! accepted only once their residual in A itself passes the tolerance.

use std::sync::Arc;

use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fourier::FlatOperator;
use crate::geometry::ConformalMetric;
use crate::par;

const BLOCK: usize = 24;
const START_SEED: u64 = 0x005e_ed0f_4a11;

pub(crate) struct WeightedLaplacian {
    op: Arc<FlatOperator>,
    half_rho: Vec<f64>,
    /// Unit vector spanning the kernel.
    kernel: Vec<f64>,
}

impl WeightedLaplacian {
    pub(crate) fn new(m: &ConformalMetric) -> Self {
        let half_rho: Vec<f64> = m.u().iter().map(|v| (0.5 * v).exp()).collect();
        let norm = half_rho.iter().map(|w| w * w).sum::<f64>().sqrt();
        let kernel = half_rho.iter().map(|w| w / norm).collect();
        WeightedLaplacian { op: m.operator(), half_rho, kernel }
    }

    pub(crate) fn dim(&self) -> usize {
        self.half_rho.len()
    }

    pub(crate) fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    fn project_out_kernel(&self, x: &mut [f64]) {
        let c: f64 = x.iter().zip(&self.kernel).map(|(a, b)| a * b).sum();
        x.iter_mut().zip(&self.kernel).for_each(|(a, k)| *a -= c * k);
    }

    /// y = A x for one or two vectors.
    fn apply_pair(&self, x: &[f64], x2: Option<&[f64]>, y: &mut [f64], y2: Option<&mut [f64]>) {
        let scale = |v: &[f64]| -> Vec<f64> { v.iter().zip(&self.half_rho).map(|(a, w)| a / w).collect() };
        let a = scale(x);
        let b = x2.map(scale);
        let mut tmp = vec![0.0; self.dim()];
        self.op.apply_multiplier(&a, b.as_deref(), |lam| lam, y, Some(&mut tmp));
        y.iter_mut().zip(&self.half_rho).for_each(|(v, w)| *v /= w);
        if let Some(y2) = y2 {
            y2.iter_mut().zip(&tmp).zip(&self.half_rho).for_each(|((v, t), w)| *v = t / w);
        }
    }

    /// y = A^+ x for one or two vectors; outputs are orthogonal to the kernel.
    fn apply_pinv_pair(&self, x: &[f64], x2: Option<&[f64]>, y: &mut [f64], y2: Option<&mut [f64]>) {
        let prep = |v: &[f64]| -> Vec<f64> {
            let mut v = v.to_vec();
            self.project_out_kernel(&mut v);
            v.iter_mut().zip(&self.half_rho).for_each(|(a, w)| *a *= w);
            v
        };
        let a = prep(x);
        let b = x2.map(prep);
        let inv = |lam: f64| if lam > 0.0 { 1.0 / lam } else { 0.0 };
        let mut tmp = vec![0.0; self.dim()];
        self.op.apply_multiplier(&a, b.as_deref(), inv, y, Some(&mut tmp));
        y.iter_mut().zip(&self.half_rho).for_each(|(v, w)| *v *= w);
        self.project_out_kernel(y);
        if let Some(y2) = y2 {
            y2.iter_mut().zip(&tmp).zip(&self.half_rho).for_each(|((v, t), w)| *v = t * w);
            self.project_out_kernel(y2);
        }
    }

    /// Applies A (or A^+) to every column of a column-major block.
    fn apply_block(&self, x: &[f64], pinv: bool) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; x.len()];
        par::for_each_chunk(&mut out, 2 * n, |i, chunk| {
            let src = &x[2 * n * i..(2 * n * i + chunk.len())];
            let (y1, y2) = chunk.split_at_mut(n.min(chunk.len()));
            let (x1, x2) = src.split_at(n.min(src.len()));
            let x2 = (!x2.is_empty()).then_some(x2);
            let y2 = (!y2.is_empty()).then_some(y2);
            if pinv {
                self.apply_pinv_pair(x1, x2, y1, y2);
            } else {
                self.apply_pair(x1, x2, y1, y2);
            }
        });
        out
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_block(x, false)
    }

    /// Rayleigh quotient of the kernel vector.
    pub(crate) fn kernel_eigenvalue(&self) -> f64 {
        let ak = self.apply(&self.kernel);
        ak.iter().zip(&self.kernel).map(|(a, b)| a * b).sum()
    }

    /// Dense matrix of A (for small grids).
    pub(crate) fn dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let cols = self.apply_block(&eye, false);
        let a = MatRef::from_column_major_slice(&cols, n, n);
        Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }
}

/// Nonzero eigenpairs in ascending order with unit eigenvectors of A.
pub(crate) struct LowSpectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn col_major(m: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        out.extend((0..m.nrows()).map(|i| m[(i, j)]));
    }
    out
}

fn relative_residuals(a: &WeightedLaplacian, vectors: &[f64], values: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let av = a.apply(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let r: f64 = (0..n).map(|i| (av[j * n + i] - lam * vectors[j * n + i]).powi(2)).sum();
            r.sqrt() / lam
        })
        .collect()
}

/// Orthonormalizes `block` (n x b, column-major) against the columns of `q`
/// (two passes) and within itself. Columns that collapse are refilled with
/// random directions.
fn orthonormal_extension(
    a: &WeightedLaplacian,
    q: &Mat<f64>,
    mut block: Vec<f64>,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = a.dim();
    for attempt in 0..4 {
        for _ in 0..2 {
            if q.ncols() > 0 {
                let bm = MatRef::from_column_major_slice(&block, n, b);
                let c = q.transpose() * bm;
                let corr = q * &c;
                block.iter_mut().zip(col_major(corr.as_ref())).for_each(|(x, y)| *x -= y);
            }
            for j in 0..b {
                a.project_out_kernel(&mut block[j * n..(j + 1) * n]);
            }
        }
        let bm = MatRef::from_column_major_slice(&block, n, b);
        let norms: Vec<f64> = (0..b).map(|j| bm.col(j).norm_l2()).collect();
        let qr = bm.qr();
        let r = qr.thin_R();
        let scale = norms.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let deficient: Vec<usize> = (0..b).filter(|&j| r[(j, j)].abs() < 1e-8 * scale).collect();
        if deficient.is_empty() || attempt == 3 {
            return col_major(qr.compute_thin_Q().as_ref());
        }
        for j in deficient {
            for v in &mut block[j * n..(j + 1) * n] {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }
    unreachable!()
}

/// The `want` smallest nonzero eigenpairs of A to relative residual `tol`.
pub(crate) fn lowest_krylov(a: &WeightedLaplacian, want: usize, tol: f64) -> Result<LowSpectrum> {
    let n = a.dim();
    let max_dim = n - 1;
    if want == 0 || want > max_dim {
        return Err(Error::TooManyModes { requested: want, available: max_dim });
    }
    let b = BLOCK.min(max_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let start: Vec<f64> = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut q = Mat::<f64>::zeros(n, 0);
    let mut w = Mat::<f64>::zeros(n, 0);
    // T = Q^T A^+ Q, grown one block at a time.
    let mut t = Mat::<f64>::zeros(0, 0);
    let mut block = orthonormal_extension(a, &q, start, b, &mut rng);
    let mut next_check = (5 * want / 2).max(want + 2 * b).min(max_dim);
    loop {
        let width = block.len() / n;
        let wb = a.apply_block(&block, true);
        let m0 = q.ncols();
        let m1 = m0 + width;
        q.resize_with(n, m1, |i, j| block[(j - m0) * n + i]);
        w.resize_with(n, m1, |i, j| wb[(j - m0) * n + i]);
        let wbm = MatRef::from_column_major_slice(&wb, n, width);
        let c = q.transpose() * wbm;
        t.resize_with(m1, m1, |_, _| 0.0);
        for j in 0..width {
            for i in 0..m1 {
                t[(i, m0 + j)] = c[(i, j)];
                t[(m0 + j, i)] = c[(i, j)];
            }
        }
        if m1 >= next_check || m1 + 1 > max_dim {
            let sym = Mat::from_fn(m1, m1, |i, j| 0.5 * (t[(i, j)] + t[(j, i)]));
            let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::IterationFailure {
                converged: 0,
                wanted: want,
                tol,
                dim: m1,
            })?;
            let s = evd.S().column_vector();
            let u = evd.U();
            let count = want.min(m1);
            // Largest Ritz values of A^+ are the smallest eigenvalues of A.
            let idx: Vec<usize> = (0..count).map(|k| m1 - 1 - k).collect();
            let values: Vec<f64> = idx.iter().map(|&i| 1.0 / s[i]).collect();
            let sel = Mat::from_fn(m1, count, |i, j| u[(i, idx[j])]);
            let y = col_major((&q * &sel).as_ref());
            let res = relative_residuals(a, &y, &values);
            let converged = res.iter().filter(|r| **r <= tol).count();
            if count == want && converged == want && values.iter().all(|v| *v > 0.0) {
                let vectors = y.chunks(n).map(|c| c.to_vec()).collect();
                return Ok(LowSpectrum { values, vectors });
            }
            if m1 + 1 > max_dim {
                return Err(Error::IterationFailure { converged, wanted: want, tol, dim: m1 });
            }
            next_check = (m1 + (4 * b).max(m1 / 8)).min(max_dim);
        }
        let room = max_dim - m1;
        let next_width = b.min(room);
        let fresh: Vec<f64> = wb[..n * next_width].to_vec();
        block = orthonormal_extension(a, &q, fresh, next_width, &mut rng);
    }
}

/// Full dense spectrum of A, ascending (kernel included).
pub(crate) fn dense_spectrum(a: &WeightedLaplacian) -> Result<Vec<f64>> {
    let m = a.dense();
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::IterationFailure {
        converged: 0,
        wanted: a.dim(),
        tol: 0.0,
        dim: a.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::mode_field;
    use crate::geometry::TorusModulus;

    #[test]
    fn pseudo_inverse_inverts_off_kernel() {
        let m = ConformalMetric::new(16, TorusModulus::new(0.2, 1.1).unwrap(), mode_field(16, 1, 2, 0.3), 1.0).unwrap();
        let a = WeightedLaplacian::new(&m);
        let mut x: Vec<f64> = (0..256).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        a.project_out_kernel(&mut x);
        let y = a.apply_block(&x, true);
        let z = a.apply(&y);
        let err = x.iter().zip(&z).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
        assert!(a.kernel_eigenvalue().abs() < 1e-10);
    }

    #[test]
    fn krylov_matches_dense_on_small_grid() {
        let m = ConformalMetric::new(16, TorusModulus::new(0.3, 0.9).unwrap(), mode_field(16, 1, 1, 0.4), 1.0)
            .unwrap()
            .normalize_volume();
        let a = WeightedLaplacian::new(&m);
        let dense = dense_spectrum(&a).unwrap();
        let low = lowest_krylov(&a, 30, 1e-10).unwrap();
        for (k, v) in low.values.iter().enumerate() {
            assert!((v / dense[k + 1] - 1.0).abs() < 1e-10, "{k}: {v} vs {}", dense[k + 1]);
        }
    }
}
