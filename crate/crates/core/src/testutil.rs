//! Random test matrices for unit tests. Kept out of the public API; the
//! integration suite carries its own copy in tests/common.

use crate::{C64, CMat};
use ndarray::prelude::*;
use ndarray_linalg::QR;
use rand::Rng;

pub fn random_complex<R: Rng>(rng: &mut R) -> C64 {
    // Box-Muller for roughly Gaussian entries
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    C64::new(r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin())
}

pub fn random_matrix<R: Rng>(n: usize, rng: &mut R) -> CMat {
    CMat::from_shape_fn((n, n), |_| random_complex(rng))
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    (&a + &crate::linalg::adjoint(&a)) * C64::new(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = random_matrix(n, rng);
    let (q, r) = a.qr().unwrap();
    // fix the phase convention so the distribution is not skewed by QR
    let mut q = q;
    for (j, col) in q.columns_mut().into_iter().enumerate() {
        let d = r[[j, j]];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for z in col {
                *z *= phase;
            }
        }
    }
    q
}

/// Hermitian matrix with a planted spectral cluster: `n_low` eigenvalues
/// spread over [0, width], the rest starting at width + gap.
pub fn random_gapped<R: Rng>(
    n: usize,
    n_low: usize,
    width: f64,
    gap: f64,
    rng: &mut R,
) -> (CMat, Vec<f64>) {
    assert!(n_low >= 1 && n_low < n);
    let mut vals: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n_low {
        if i == 0 {
            vals.push(0.0);
        } else {
            vals.push(rng.random::<f64>() * width);
        }
    }
    for i in 0..n - n_low {
        if i == 0 {
            vals.push(width + gap);
        } else {
            vals.push(width + gap + rng.random::<f64>() * 3.0);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let u = random_unitary(n, rng);
    let lam = CMat::from_diag(&vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Array1<_>>());
    let h = u.dot(&lam).dot(&crate::linalg::adjoint(&u));
    ((&h + &crate::linalg::adjoint(&h)) * C64::new(0.5, 0.0), vals)
}
