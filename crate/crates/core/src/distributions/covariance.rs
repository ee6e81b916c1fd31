//! Covariance hygiene: diagonal regularization and nearest-PSD repair.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Diagonal jitter added after eigenvalue clipping so the result is strictly
/// positive definite.
pub const PSD_JITTER: f64 = 1e-10;

/// Entry-wise absolute tolerance used when checking symmetry.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Returns `cov + r * I`.
pub fn regularize_cov(cov: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    let mut out = cov.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += r;
    }
    out
}

/// `(a + aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Frobenius-nearest positive semi-definite matrix to the symmetric part of
/// `a`, with `PSD_JITTER * I` added so a Cholesky factorization succeeds.
pub fn nearest_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to nearest_psd"));
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    Ok(regularize_cov(&symmetrize(&rebuilt), PSD_JITTER))
}

pub(crate) fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance matrix"));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        SymmetricEigen::new(symmetrize(m))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn regularize_examples() {
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(regularize_cov(&eye, 0.0), eye);
        assert_eq!(regularize_cov(&DMatrix::zeros(2, 2), 1.0), eye);
        assert_eq!(
            regularize_cov(&eye, 0.5),
            DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.5])
        );
    }

    #[test]
    fn identity_is_already_psd() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let out = nearest_psd(&eye).unwrap();
        let expected = regularize_cov(&eye, PSD_JITTER);
        assert!((out - expected).abs().max() < 1e-14);
    }

    #[test]
    fn clips_negative_eigenvalue() {
        // eigenvalues 3 and -1; keeping 3 v vᵀ with v = (1,1)/√2 gives 1.5 everywhere
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let out = nearest_psd(&a).unwrap();
        let expected = regularize_cov(&DMatrix::from_element(2, 2, 1.5), PSD_JITTER);
        assert!((out - expected).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(nearest_psd(&a), Err(Error::NonFinite(_))));
        let b = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(nearest_psd(&b), Err(Error::NotSquare { .. })));
    }

    fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n * n)
            .prop_map(move |v| DMatrix::from_vec(n, n, v))
    }

    proptest! {
        #[test]
        fn output_is_psd_and_idempotent(a in (1usize..5).prop_flat_map(square)) {
            let once = nearest_psd(&a).unwrap();
            let n = a.nrows();
            let without_jitter = regularize_cov(&once, -PSD_JITTER);
            prop_assert!(min_eig(&without_jitter) >= -1e-9);
            prop_assert!(once.clone().cholesky().is_some());
            let twice = nearest_psd(&once).unwrap();
            prop_assert!((twice - &once).norm() <= 1e-8, "n={}", n);
        }
    }
}
