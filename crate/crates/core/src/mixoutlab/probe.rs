//! Label-noise probe: KRR on noisy training labels across a λ² grid, scored
//! on clean test labels.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{gram, ntk_features, MixoutError, ZeroInitHead};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub lambda2: f64,
    /// Mean squared training residual against the noisy labels.
    pub train_mse_noisy: f64,
    pub test_mse_clean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
    pub flipped: usize,
}

impl ProbeTable {
    /// The training residual never shrinks as λ² grows, i.e. the fit to the
    /// noisy labels never improves.
    pub fn fit_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].train_mse_noisy >= w[0].train_mse_noisy)
    }

    /// Row with the smallest clean test error among rows after the first.
    pub fn best_regularized(&self) -> Option<&ProbeRow> {
        self.rows
            .iter()
            .skip(1)
            .min_by(|a, b| a.test_mse_clean.total_cmp(&b.test_mse_clean))
    }
}

/// Train and test features (one row per input) with clean labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeData {
    pub phi_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub phi_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
}

/// Negates `round(noise_rate · n)` training labels chosen without
/// replacement, then solves KRR for every λ² in `grid` (which must be
/// increasing). Everything goes through one eigendecomposition of K, so the
/// training residual λ²(K + λ²I)⁻¹y is monotone in λ² term by term.
pub fn noise_robustness_probe(
    data: &ProbeData,
    noise_rate: f64,
    grid: &[f64],
    seed: u64,
) -> Result<ProbeTable, MixoutError> {
    if !(0.0..1.0).contains(&noise_rate) {
        return Err(MixoutError::InvalidParameter(format!("noise rate {noise_rate}")));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 0.0 {
        return Err(MixoutError::InvalidParameter(
            "λ² grid must be non-empty, non-negative and increasing".into(),
        ));
    }
    let n = data.y_train.len();
    if data.phi_train.nrows() != n {
        return Err(MixoutError::DimensionMismatch(data.phi_train.nrows(), n));
    }
    if data.phi_test.nrows() != data.y_test.len() {
        return Err(MixoutError::DimensionMismatch(data.phi_test.nrows(), data.y_test.len()));
    }
    if data.phi_test.ncols() != data.phi_train.ncols() {
        return Err(MixoutError::DimensionMismatch(data.phi_test.ncols(), data.phi_train.ncols()));
    }

    let flipped = (noise_rate * n as f64).round() as usize;
    let mut rng = crate::seed::rng(seed);
    let mut y = data.y_train.clone();
    for i in sample(&mut rng, n, flipped) {
        y[i] = -y[i];
    }

    let eig = SymmetricEigen::new(gram(&data.phi_train));
    let evals: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0)).collect();
    let proj = eig.eigenvectors.tr_mul(&y);
    let cross = &data.phi_test * data.phi_train.transpose();

    let mut rows = Vec::with_capacity(grid.len());
    for &lambda2 in grid {
        let mut train_sse = 0.0;
        let mut scaled = DVector::zeros(n);
        for i in 0..n {
            let denom = evals[i] + lambda2;
            let shrink = if lambda2 == 0.0 { 0.0 } else { lambda2 / denom };
            train_sse += (shrink * proj[i]).powi(2);
            if denom == 0.0 {
                return Err(MixoutError::Singular);
            }
            scaled[i] = proj[i] / denom;
        }
        let coeffs = &eig.eigenvectors * scaled;
        let pred = &cross * coeffs;
        rows.push(ProbeRow {
            lambda2,
            train_mse_noisy: train_sse / n as f64,
            test_mse_clean: (pred - &data.y_test).norm_squared() / data.y_test.len() as f64,
        });
    }
    Ok(ProbeTable { rows, flipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub in_dim: usize,
    pub width: usize,
    pub noise_rate: f64,
    pub lambda2_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_train: 60,
            n_test: 200,
            in_dim: 8,
            width: 512,
            noise_rate: 0.3,
            lambda2_grid: vec![1e-8, 1e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0],
            seed: 0,
        }
    }
}

impl ProbeConfig {
    /// ±1 labels sign(a·x) for a random direction a, NTK features of a
    /// zero-initialized network rescaled so the mean kernel diagonal over
    /// training inputs is 1.
    pub fn data(&self) -> Result<ProbeData, MixoutError> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::seed::rng(self.seed);
        let mut gauss = |d: usize| -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let a = gauss(self.in_dim);
        let x_train: Vec<Vec<f64>> = (0..self.n_train).map(|_| gauss(self.in_dim)).collect();
        let x_test: Vec<Vec<f64>> = (0..self.n_test).map(|_| gauss(self.in_dim)).collect();
        let label = |x: &Vec<f64>| {
            if x.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() >= 0.0 {
                1.0
            } else {
                -1.0
            }
        };
        let model = ZeroInitHead::new(self.width, self.in_dim, 1, crate::seed::derive_seed(self.seed, 1));
        let phi = ntk_features(&model, &x_train)?;
        let mean_diag = phi.norm_squared() / self.n_train.max(1) as f64;
        let model = model.with_output_scale(1.0 / mean_diag.sqrt());
        Ok(ProbeData {
            phi_train: ntk_features(&model, &x_train)?,
            y_train: DVector::from_iterator(self.n_train, x_train.iter().map(label)),
            phi_test: ntk_features(&model, &x_test)?,
            y_test: DVector::from_iterator(self.n_test, x_test.iter().map(label)),
        })
    }

    pub fn run(&self) -> Result<ProbeTable, MixoutError> {
        noise_robustness_probe(
            &self.data()?,
            self.noise_rate,
            &self.lambda2_grid,
            crate::seed::derive_seed(self.seed, 2),
        )
    }
}
