use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::jlss::X0Distribution;
use crate::linalg::{is_symmetric, min_eigenvalue};
use crate::{Error, Result};

/// Accuracy function `h(x0)` bounding the squared output distance.
#[derive(Debug, Clone, PartialEq)]
pub enum AccuracyModel {
    Scalar(f64),
    /// `Θ_k` per initial mode `k`, evaluated as `[x0; 1]' Θ_k [x0; 1]`.
    QuadraticPerMode(Vec<DMatrix<f64>>),
}

/// Augmented vector `[x0; 1]`.
pub fn augment(x0: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x0.len() + 1, x0.iter().copied().chain(core::iter::once(1.0)))
}

impl AccuracyModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AccuracyModel::Scalar(h) if !(*h >= 0.0) => {
                Err(Error::param(format!("scalar accuracy must be nonnegative, got {h}")))
            }
            AccuracyModel::Scalar(_) => Ok(()),
            AccuracyModel::QuadraticPerMode(thetas) => {
                if thetas.is_empty() {
                    return Err(Error::Empty);
                }
                for t in thetas {
                    if !is_symmetric(t) || t.nrows() != thetas[0].nrows() {
                        return Err(Error::NotSymmetric);
                    }
                    let min = min_eigenvalue(t);
                    if min < -1e-8 * t.amax().max(1.0) {
                        return Err(Error::NotPsd(min));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, x0: &[f64], mode: usize) -> Result<f64> {
        match self {
            AccuracyModel::Scalar(h) => Ok(*h),
            AccuracyModel::QuadraticPerMode(thetas) => {
                let theta = thetas.get(mode).ok_or(Error::UnknownMode(mode))?;
                if theta.nrows() != x0.len() + 1 {
                    return Err(Error::dim(format!(
                        "accuracy matrix is {}x{}, state has length {}",
                        theta.nrows(),
                        theta.ncols(),
                        x0.len()
                    )));
                }
                let z = augment(x0);
                Ok(z.dot(&(theta * &z)))
            }
        }
    }

    /// `E[h(x0)]` under the given moments.
    pub fn expected(&self, moments: &MomentData) -> Result<f64> {
        match self {
            AccuracyModel::Scalar(h) => Ok(*h),
            AccuracyModel::QuadraticPerMode(thetas) => {
                if thetas.len() != moments.modes() {
                    return Err(Error::dim("one accuracy matrix per mode is required"));
                }
                Ok(thetas.iter().zip(&moments.modes).map(|(t, (m, p))| p * t.dot(m)).sum())
            }
        }
    }

    /// Number of free parameters (the `r` of the sample-size bounds).
    pub fn param_count(&self) -> usize {
        match self {
            AccuracyModel::Scalar(_) => 1,
            AccuracyModel::QuadraticPerMode(t) => t.iter().map(|m| m.nrows() * (m.nrows() + 1) / 2).sum(),
        }
    }
}

/// Per-mode moment matrices `E[[x0; 1][x0; 1]' | mode k]` and mode
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentData {
    modes: Vec<(DMatrix<f64>, f64)>,
}

impl MomentData {
    pub fn new(modes: Vec<(DMatrix<f64>, f64)>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Empty);
        }
        let dim = modes[0].0.nrows();
        let mut total = 0.0;
        for (m, p) in &modes {
            if m.nrows() != dim || !m.is_square() || dim == 0 {
                return Err(Error::dim("moment matrices must share one square shape"));
            }
            if !is_symmetric(m) {
                return Err(Error::NotSymmetric);
            }
            let min = min_eigenvalue(m);
            if min < -1e-10 * m.amax().max(1.0) {
                return Err(Error::NotPsd(min));
            }
            if (m[(dim - 1, dim - 1)] - 1.0).abs() > 1e-12 {
                return Err(Error::param("moment matrix must have bottom-right entry 1"));
            }
            if !(*p >= 0.0 && *p <= 1.0) {
                return Err(Error::param(format!("mode probability {p} outside [0, 1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("mode probabilities sum to {total}")));
        }
        Ok(MomentData { modes })
    }

    /// Single-mode moments of a continuous initial distribution.
    pub fn from_distribution(dist: &X0Distribution) -> Self {
        let n = dist.dim();
        let mean = dist.mean();
        let second = dist.second_moment();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&second);
        for i in 0..n {
            m[(i, n)] = mean[i];
            m[(n, i)] = mean[i];
        }
        m[(n, n)] = 1.0;
        MomentData { modes: alloc::vec![(m, 1.0)] }
    }

    pub fn modes(&self) -> usize {
        self.modes.len()
    }

    /// Dimension of the continuous state.
    pub fn state_dim(&self) -> usize {
        self.modes[0].0.nrows() - 1
    }

    pub fn moment(&self, mode: usize) -> Result<&DMatrix<f64>> {
        self.modes.get(mode).map(|m| &m.0).ok_or(Error::UnknownMode(mode))
    }

    pub fn probability(&self, mode: usize) -> Result<f64> {
        self.modes.get(mode).map(|m| m.1).ok_or(Error::UnknownMode(mode))
    }
}
