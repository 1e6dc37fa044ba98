//! Gaussian moments and the Fréchet distance between two embedding sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{EmbeddingMatrix, MetricsError};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Sample mean and unbiased (n−1) covariance, two-pass.
pub fn gaussian_moments(e: &EmbeddingMatrix) -> Result<GaussianMoments, MetricsError> {
    let n = e.rows();
    if n < 2 {
        return Err(MetricsError::TooFewSamples {
            what: "Gaussian moments",
            need: 2,
            got: n,
        });
    }
    let d = e.cols();
    let mut mean = DVector::zeros(d);
    for row in e.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;

    let mut centered = e.to_dmatrix();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    symmetrize(&mut cov);
    Ok(GaussianMoments { mean, cov })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Square root of a symmetric PSD matrix, negative eigenvalues clamped to 0.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Trace of the PSD square root via eigenvalues, clamped at 0.
fn trace_sqrt(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum()
}

pub fn frechet_from_moments(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64, MetricsError> {
    if a.mean.len() != b.mean.len() {
        return Err(MetricsError::DimensionMismatch(a.mean.len(), b.mean.len()));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let s1 = psd_sqrt(&a.cov);
    let mut inner = &s1 * &b.cov * &s1;
    symmetrize(&mut inner);
    let fd = diff + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt(inner);
    if !fd.is_finite() {
        return Err(MetricsError::NonFinite("Fréchet distance"));
    }
    Ok(fd.max(0.0))
}

/// ‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2}).
pub fn frechet_distance(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<f64, MetricsError> {
    if a.cols() != b.cols() {
        return Err(MetricsError::DimensionMismatch(a.cols(), b.cols()));
    }
    frechet_from_moments(&gaussian_moments(a)?, &gaussian_moments(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = crate::seed::rng(seed);
        let v = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        EmbeddingMatrix::new(rows, cols, v).unwrap()
    }

    #[test]
    fn two_point_moments() {
        let e = EmbeddingMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let m = gaussian_moments(&e).unwrap();
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.cov[(0, 0)], 2.0);

        let same = EmbeddingMatrix::from_rows(&vec![vec![1.0, -3.0]; 4]).unwrap();
        assert!(gaussian_moments(&same).unwrap().cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn moments_match_naive_two_pass() {
        let e = random(100, 5, 3);
        let m = gaussian_moments(&e).unwrap();
        for j in 0..5 {
            let mj: f64 = (0..100).map(|i| e.row(i)[j]).sum::<f64>() / 100.0;
            assert!((m.mean[j] - mj).abs() < 1e-12);
            for k in 0..5 {
                let mk: f64 = (0..100).map(|i| e.row(i)[k]).sum::<f64>() / 100.0;
                let c: f64 = (0..100)
                    .map(|i| (e.row(i)[j] - mj) * (e.row(i)[k] - mk))
                    .sum::<f64>()
                    / 99.0;
                assert!((m.cov[(j, k)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_few_rows_and_dimension_mismatch() {
        let one = random(1, 3, 0);
        assert!(matches!(
            gaussian_moments(&one),
            Err(MetricsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            frechet_distance(&random(5, 3, 0), &random(5, 4, 0)),
            Err(MetricsError::DimensionMismatch(3, 4))
        ));
    }

    #[test]
    fn self_distance_and_symmetry() {
        let a = random(200, 6, 1);
        let b = random(150, 6, 2);
        assert!(frechet_distance(&a, &a).unwrap() <= 1e-8);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-8);
    }

    #[test]
    fn rotation_invariant() {
        let a = random(120, 4, 5);
        let b = random(80, 4, 6);
        // orthogonal matrix from the QR of a random matrix
        let q = random(4, 4, 7).to_dmatrix().qr().q();
        let rot = |e: &EmbeddingMatrix| {
            let r = e.to_dmatrix() * &q;
            let rows: Vec<Vec<f64>> = r.row_iter().map(|row| row.iter().copied().collect()).collect();
            EmbeddingMatrix::from_rows(&rows).unwrap()
        };
        let before = frechet_distance(&a, &b).unwrap();
        let after = frechet_distance(&rot(&a), &rot(&b)).unwrap();
        assert!((before - after).abs() <= 1e-6);
    }
}
