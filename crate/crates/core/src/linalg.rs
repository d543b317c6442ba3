//! Dense complex linear algebra helpers shared by every module.
//!
//! Thin wrappers over LAPACK (through `ndarray-linalg`) that fix the
//! conventions used crate-wide: eigenvalues ascending, eigenvectors as
//! columns, operator norm = largest singular value.

use crate::{C64, CMat, Error, Result};
use ndarray_linalg::{Determinant, Eigh, SVD, UPLO};

pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Max-entry distance from Hermiticity, ‖A − A*‖_max.
pub fn herm_defect(a: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    a.is_square() && herm_defect(a) <= tol
}

/// Exact Hermitian part (A + A*)/2; used to stop roundoff drift before
/// repeated eigendecompositions.
pub fn hermitize(a: &CMat) -> CMat {
    (a + &adjoint(a)) * C64::new(0.5, 0.0)
}

fn lapack_err(op: &str, e: impl std::fmt::Display) -> Error {
    Error::ConvergenceFailure(format!("{op} failed: {e}"))
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal column eigenvectors.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| lapack_err("eigendecomposition", e))?;
    // the backend hands back eigenvectors of Aᵀ = conj(A); conjugating makes
    // the columns eigenvectors of A itself
    Ok((vals.to_vec(), vecs.mapv(|z| z.conj())))
}

/// Operator (spectral) norm: largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let (_, s, _) = a.svd(false, false).expect("svd of finite dense matrix");
    s.iter().fold(0.0_f64, |m, &v| m.max(v))
}

/// exp(i·theta·G) for Hermitian G, assembled from the eigendecomposition so
/// the result is unitary to machine precision.
pub fn expi_hermitian(g: &CMat, theta: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(g)?;
    let phases: Vec<C64> = vals
        .iter()
        .map(|&e| C64::from_polar(1.0, theta * e))
        .collect();
    let mut scaled = vecs.clone();
    for (j, col) in scaled.columns_mut().into_iter().enumerate() {
        let p = phases[j];
        for z in col {
            *z *= p;
        }
    }
    Ok(scaled.dot(&adjoint(&vecs)))
}

/// Unitary polar factor of A (the unitary closest to A in Frobenius norm).
pub fn polar_unitary(a: &CMat) -> Result<CMat> {
    let (u, _, vt) = a.svd(true, true).map_err(|e| lapack_err("svd", e))?;
    Ok(u.unwrap().dot(&vt.unwrap()))
}

/// Rotate the orthonormal columns of `frame` by the unitary that brings them
/// closest to `reference` (polar factor of frame*·reference). Gauge fixing
/// for eigenframes along parameter paths; spans are unchanged.
pub fn align_columns(reference: &CMat, frame: &CMat) -> Result<CMat> {
    let overlap = adjoint(frame).dot(reference);
    let w = polar_unitary(&overlap)?;
    Ok(frame.dot(&w))
}

/// det of a square complex matrix (κ×κ link overlaps in Chern sums).
pub fn det(a: &CMat) -> Result<C64> {
    a.det().map_err(|e| lapack_err("determinant", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_hermitian, random_matrix, random_unitary};
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_involution_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(5, &mut rng);
        assert_eq!(adjoint(&adjoint(&a)), a);
        let tr = trace(&a);
        let tr_adj = trace(&adjoint(&a));
        assert!((tr.conj() - tr_adj).norm() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(8, &mut rng);
        let (vals, vecs) = eigh(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lam = CMat::from_diag(&vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Array1<_>>());
        let rebuilt = vecs.dot(&lam).dot(&adjoint(&vecs));
        assert!(max_abs(&(&rebuilt - &h)) < 1e-12);
    }

    #[test]
    fn op_norm_matches_largest_eigenvalue_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(12, &mut rng);
        let (vals, _) = eigh(&h).unwrap();
        let by_eig = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        assert!((op_norm(&h) - by_eig).abs() < 1e-12);
    }

    #[test]
    fn expi_hermitian_is_unitary_and_matches_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_hermitian(6, &mut rng);
        let u = expi_hermitian(&g, 0.37).unwrap();
        let defect = &adjoint(&u).dot(&u) - &identity(6);
        assert!(max_abs(&defect) < 1e-13);
        // compare against a straight Taylor series at small angle
        let theta = 1e-3;
        let u_small = expi_hermitian(&g, theta).unwrap();
        let it = C64::new(0.0, theta);
        let series = identity(6) + &g * it + &g.dot(&g) * (it * it / 2.0) + &g.dot(&g).dot(&g) * (it * it * it / 6.0);
        assert!(max_abs(&(&u_small - &series)) < 1e-11);
    }

    #[test]
    fn polar_of_unitary_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(7, &mut rng);
        let w = polar_unitary(&u).unwrap();
        assert!(max_abs(&(&w - &u)) < 1e-12);
    }

    #[test]
    fn align_columns_fixes_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_unitary(5, &mut rng);
        let reference = u.slice(ndarray::s![.., 0..2]).to_owned();
        // same span, scrambled by a random 2×2 unitary and a phase
        let mix = random_unitary(2, &mut rng) * C64::from_polar(1.0, 0.83);
        let frame = reference.dot(&mix);
        let aligned = align_columns(&reference, &frame).unwrap();
        assert!(max_abs(&(&aligned - &reference)) < 1e-12);
    }
}
