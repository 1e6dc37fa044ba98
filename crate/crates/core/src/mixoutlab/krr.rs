//! Kernel ridge regression: c = (K + λ²I)⁻¹Y, f*(x) = k(x, X)ᵀc.

use nalgebra::{DMatrix, DVector};

use super::MixoutError;

const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// K = ΦΦᵀ for a feature matrix with one row per input.
pub fn gram(features: &DMatrix<f64>) -> DMatrix<f64> {
    features * features.transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSystem {
    pub k: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lambda2: f64,
}

impl KernelSystem {
    pub fn new(k: DMatrix<f64>, y: DVector<f64>, lambda2: f64) -> Result<Self, MixoutError> {
        if !k.is_square() {
            return Err(MixoutError::DimensionMismatch(k.nrows(), k.ncols()));
        }
        if k.nrows() != y.len() {
            return Err(MixoutError::DimensionMismatch(k.nrows(), y.len()));
        }
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(MixoutError::InvalidParameter(format!("λ² = {lambda2}")));
        }
        if k.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(MixoutError::NonFinite("kernel system"));
        }
        let scale = k.amax().max(1.0);
        if (&k - k.transpose()).amax() > SYMMETRY_TOLERANCE * scale {
            return Err(MixoutError::NotSymmetric);
        }
        Ok(KernelSystem { k, y, lambda2 })
    }

    pub fn solve(&self) -> Result<DVector<f64>, MixoutError> {
        let mut a = self.k.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += self.lambda2;
        }
        // symmetrize so the factorization sees the lower triangle it expects
        let a = (&a + a.transpose()) * 0.5;
        let chol = a.cholesky().ok_or(MixoutError::Singular)?;
        let c = chol.solve(&self.y);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(MixoutError::Singular);
        }
        Ok(c)
    }

    /// ‖(K + λ²I)c − Y‖₂.
    pub fn residual(&self, c: &DVector<f64>) -> f64 {
        (&self.k * c + c * self.lambda2 - &self.y).norm()
    }
}

pub fn krr_solve(k: &DMatrix<f64>, y: &DVector<f64>, lambda2: f64) -> Result<DVector<f64>, MixoutError> {
    KernelSystem::new(k.clone(), y.clone(), lambda2)?.solve()
}

/// `k_cross` has one row per test point and one column per training point.
pub fn krr_predict(k_cross: &DMatrix<f64>, coefficients: &DVector<f64>) -> Result<DVector<f64>, MixoutError> {
    if k_cross.ncols() != coefficients.len() {
        return Err(MixoutError::DimensionMismatch(k_cross.ncols(), coefficients.len()));
    }
    Ok(k_cross * coefficients)
}
