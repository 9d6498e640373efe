//! Deterministic random sources and matrix samplers.
//!
//! Every stream is keyed by `(seed, stream)`: ChaCha's 64-bit stream id is the
//! counter-based key, so trial `i` draws the same numbers no matter which
//! worker runs it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::DenseMatrix;

pub type TrialRng = ChaCha8Rng;

/// The generator for stream `stream` under `seed`.
pub fn keyed_rng(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard complex Gaussian, `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(s * gaussian(rng), s * gaussian(rng))
}

/// Ginibre matrix: i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| Complex64::new(gaussian(rng), 0.0))
}

/// Entries uniform on `[0, 1)`.
pub fn uniform_nonneg<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random::<f64>(), 0.0))
}

/// Entries uniform on `[lo, hi)`.
pub fn uniform_range<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(lo..hi), 0.0))
}

/// Unit column vector, uniformly distributed on the complex sphere.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DenseMatrix {
    let v = ginibre(rng, n, 1);
    let norm = v.frobenius_norm();
    v.scale(1.0 / norm)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DenseMatrix {
    let g = ginibre(rng, n, n).into_nalgebra();
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            d / d.norm()
        };
        q.column_mut(j).apply(|z| *z *= phase);
    }
    DenseMatrix::from_nalgebra(q).expect("finite unitary")
}

/// Random PSD matrix `G*G` with `G` a `rank x n` Ginibre matrix.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> DenseMatrix {
    let g = ginibre(rng, rank.max(1), n);
    let p = &g.adjoint() * &g;
    hermitize(&p)
}

/// Real PSD matrix `G^T G` with real Gaussian `G`.
pub fn random_real_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> DenseMatrix {
    let g = real_gaussian(rng, rank.max(1), n);
    hermitize(&(&g.transpose() * &g))
}

/// `(A + A*)/2`, removing rounding asymmetry from products like `G*G`.
pub fn hermitize(a: &DenseMatrix) -> DenseMatrix {
    (a + &a.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = keyed_rng(42, 7);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = keyed_rng(42, 7);
                move |_| r.random()
            })
            .collect();
        let c: Vec<u64> = (0..4)
            .map({
                let mut r = keyed_rng(42, 8);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = keyed_rng(1, 0);
        let u = haar_unitary(&mut rng, 5);
        let uu = &u.adjoint() * &u;
        assert!(uu.max_abs_diff(&DenseMatrix::identity(5)) < 1e-13);
    }
}
