use nalgebra::DMatrix;

use crate::linalg::{is_symmetric, symmetrize};
use crate::{Error, Result};

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped to zero).
pub fn project_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_symmetric(m) {
        return Err(Error::NotSymmetric);
    }
    let eig = symmetrize(m).symmetric_eigen();
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psd_input_is_unchanged() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((project_psd(&a).unwrap() - &a).amax() < 1e-12);
    }

    #[test]
    fn clamps_negative_part() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]);
        let p = project_psd(&a).unwrap();
        assert!((p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(project_psd(&a), Err(Error::NotSymmetric)));
    }

    #[test]
    fn no_sampled_psd_matrix_is_closer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let b = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let a = symmetrize(&b);
            let p = project_psd(&a).unwrap();
            let best = (&a - &p).norm();
            for _ in 0..200 {
                let f = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
                let q = &f * f.transpose();
                assert!((&a - q).norm() >= best - 1e-12);
            }
        }
    }
}
