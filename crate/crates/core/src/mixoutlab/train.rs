//! Training the linearized model f(x; θ) = φ(x)ᵀ(θ − u), either on the
//! explicit ridge objective or with mixout masks sampled every step, and the
//! comparison of both against kernel ridge regression.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{gram, krr_predict, krr_solve, ntk_features, sample_dropped, MixoutConfig, MixoutError, ZeroInitHead};

/// Which parameters the trained model uses at test time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestParams {
    /// θ = w, the mask expectation E[Φ].
    #[default]
    Expected,
    /// θ = Φ with M = I, i.e. (w − (1−μ)u)/μ.
    MaskOnes,
}

/// Test-time predictions Φ_test(θ − u) for trained offset δ = w − u.
pub fn predict(features: &DMatrix<f64>, delta: &DVector<f64>, mode: TestParams, mu: f64) -> DVector<f64> {
    match mode {
        TestParams::Expected => features * delta,
        TestParams::MaskOnes => features * delta / mu,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeOptions {
    pub max_steps: usize,
    /// Defaults to 1/L for the smoothness constant L of the objective.
    pub lr: Option<f64>,
    pub grad_tol: f64,
    /// Consecutive loss increases that count as divergence.
    pub divergence_window: usize,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            max_steps: 200_000,
            lr: None,
            grad_tol: 1e-8,
            divergence_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    /// w − u.
    pub delta: DVector<f64>,
    pub steps: usize,
    pub grad_norm: f64,
    pub loss: f64,
}

/// Largest eigenvalue of ΦᵀΦ, computed on the smaller n×n Gram matrix.
fn feature_lipschitz(features: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(gram(features)).eigenvalues.max().max(0.0)
}

fn check_rows(features: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), MixoutError> {
    if features.nrows() != y.len() {
        return Err(MixoutError::DimensionMismatch(features.nrows(), y.len()));
    }
    Ok(())
}

/// Full-batch gradient descent on ½‖Φδ − Y‖² + (λ²/2)‖δ‖² from δ = 0 until
/// the gradient norm drops to `grad_tol`.
pub fn train_linearized_ridge(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda2: f64,
    options: &RidgeOptions,
) -> Result<RidgeFit, MixoutError> {
    check_rows(features, y)?;
    let smooth = feature_lipschitz(features) + lambda2;
    let lr = options.lr.unwrap_or(1.0 / smooth.max(f64::MIN_POSITIVE));
    if !(lr > 0.0 && lr < 2.0 / smooth) {
        return Err(MixoutError::InvalidParameter(format!(
            "learning rate {lr} outside (0, 2/L) with L = {smooth}"
        )));
    }

    let mut delta = DVector::zeros(features.ncols());
    let mut prev_loss = f64::INFINITY;
    let mut increases = 0;
    for step in 0..=options.max_steps {
        let r = features * &delta - y;
        let loss = 0.5 * r.norm_squared() + 0.5 * lambda2 * delta.norm_squared();
        let grad = features.tr_mul(&r) + &delta * lambda2;
        let grad_norm = grad.norm();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(MixoutError::Diverged { step });
        }
        if grad_norm <= options.grad_tol {
            return Ok(RidgeFit {
                delta,
                steps: step,
                grad_norm,
                loss,
            });
        }
        if step == options.max_steps {
            return Err(MixoutError::NotConverged {
                steps: step,
                grad_norm,
            });
        }
        increases = if loss > prev_loss { increases + 1 } else { 0 };
        if increases >= options.divergence_window {
            return Err(MixoutError::Diverged { step });
        }
        prev_loss = loss;
        delta.axpy(-lr, &grad, 1.0);
    }
    unreachable!("loop returns on its last step")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdOptions {
    pub steps: usize,
    /// Defaults to μ/(2L).
    pub lr: Option<f64>,
    /// Iterates from this fraction of the run onward are averaged.
    pub average_from: f64,
    pub seed: u64,
}

impl Default for SgdOptions {
    fn default() -> Self {
        SgdOptions {
            steps: 4000,
            lr: None,
            average_from: 0.5,
            seed: 0,
        }
    }
}

/// Gradient steps on ½‖Φ·M(w − u)/μ − Y‖² with a fresh mask M each step and
/// no explicit penalty. Returns the averaged offset w − u.
pub fn train_stochastic_mixout(
    features: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &MixoutConfig,
    options: &SgdOptions,
) -> Result<DVector<f64>, MixoutError> {
    check_rows(features, y)?;
    if options.steps == 0 || !(0.0..1.0).contains(&options.average_from) {
        return Err(MixoutError::InvalidParameter("steps > 0 and average_from in [0, 1)".into()));
    }
    let mu = config.mu();
    let lr = options
        .lr
        .unwrap_or(0.5 * mu / (feature_lipschitz(features) + config.lambda2()));
    let p = features.ncols();
    let mut rng = crate::seed::rng(options.seed);
    let mut delta = DVector::zeros(p);
    let mut avg = DVector::zeros(p);
    let start = (options.steps as f64 * options.average_from) as usize;

    for step in 0..options.steps {
        let dropped = sample_dropped(p, config.p_replace(), &mut rng);
        let mut z = &delta / mu;
        for &i in &dropped {
            z[i] = 0.0;
        }
        let r = features * &z - y;
        let mut grad = features.tr_mul(&r) / mu;
        for &i in &dropped {
            grad[i] = 0.0;
        }
        delta.axpy(-lr, &grad, 1.0);
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(MixoutError::Diverged { step });
        }
        if step >= start {
            avg += &delta;
        }
    }
    Ok(avg / (options.steps - start) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Theorem2Config {
    pub width: usize,
    pub in_dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub p_replace: f64,
    pub m: f64,
    pub seed: u64,
    /// Scale the network output so the loss curvature along each parameter
    /// averages m.
    pub calibrate: bool,
    pub ridge: RidgeOptions,
    pub sgd: SgdOptions,
}

impl Default for Theorem2Config {
    fn default() -> Self {
        Theorem2Config {
            width: 4096,
            in_dim: 8,
            n_train: 20,
            n_test: 50,
            p_replace: 0.05,
            m: 1.0,
            seed: 0,
            calibrate: true,
            ridge: RidgeOptions::default(),
            sgd: SgdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Result {
    pub lambda2: f64,
    pub output_scale: f64,
    pub krr_test: Vec<f64>,
    pub ridge_test: Vec<f64>,
    pub mixout_test: Vec<f64>,
    pub ridge_rmse: f64,
    pub mixout_rmse: f64,
    /// Mixout predictions with the all-ones test mask, against KRR.
    pub mixout_mask_ones_rmse: f64,
    pub ridge_steps: usize,
    pub ridge_grad_norm: f64,
}

fn rmse(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

fn sphere_points(n: usize, d: usize, rng: &mut crate::seed::Rng) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let scale = (d as f64).sqrt() / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * scale).collect()
        })
        .collect()
}

/// Train a zero-initialized two-layer network in its linearized regime on a
/// smooth 1-d target of inputs on the sphere of radius √d, and compare test
/// predictions from explicit-ridge GD and from stochastic mixout training
/// with the KRR solution at λ² = mσ²/μ².
pub fn theorem2_experiment(cfg: &Theorem2Config) -> Result<Theorem2Result, MixoutError> {
    let mixout = MixoutConfig::new(cfg.p_replace, cfg.m)?;
    let lambda2 = mixout.lambda2();
    let mut rng = crate::seed::rng(cfg.seed);
    let x_train = sphere_points(cfg.n_train, cfg.in_dim, &mut rng);
    let x_test = sphere_points(cfg.n_test, cfg.in_dim, &mut rng);
    let norm = (cfg.in_dim as f64).sqrt();
    let y = DVector::from_iterator(
        cfg.n_train,
        x_train.iter().map(|x| (2.0 * x.iter().sum::<f64>() / norm).sin()),
    );

    let mut model = ZeroInitHead::new(cfg.width, cfg.in_dim, 1, crate::seed::derive_seed(cfg.seed, 1));
    if cfg.calibrate {
        let phi = ntk_features(&model, &x_train)?;
        let mean_curvature = phi.iter().map(|v| v * v).sum::<f64>() / phi.ncols() as f64;
        model = model.with_output_scale((cfg.m / mean_curvature).sqrt());
    }
    let phi_train = ntk_features(&model, &x_train)?;
    let phi_test = ntk_features(&model, &x_test)?;

    let coeffs = krr_solve(&gram(&phi_train), &y, lambda2)?;
    let krr = krr_predict(&(&phi_test * phi_train.transpose()), &coeffs)?;

    let fit = train_linearized_ridge(&phi_train, &y, lambda2, &cfg.ridge)?;
    let ridge = predict(&phi_test, &fit.delta, TestParams::Expected, mixout.mu());

    let sgd = SgdOptions {
        seed: crate::seed::derive_seed(cfg.seed, 2),
        ..cfg.sgd
    };
    let delta = train_stochastic_mixout(&phi_train, &y, &mixout, &sgd)?;
    let mixout_pred = predict(&phi_test, &delta, TestParams::Expected, mixout.mu());
    let ones_pred = predict(&phi_test, &delta, TestParams::MaskOnes, mixout.mu());

    Ok(Theorem2Result {
        lambda2,
        output_scale: model.output_scale(),
        ridge_rmse: rmse(&ridge, &krr),
        mixout_rmse: rmse(&mixout_pred, &krr),
        mixout_mask_ones_rmse: rmse(&ones_pred, &krr),
        krr_test: krr.iter().copied().collect(),
        ridge_test: ridge.iter().copied().collect(),
        mixout_test: mixout_pred.iter().copied().collect(),
        ridge_steps: fit.steps,
        ridge_grad_norm: fit.grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_problem() -> (DMatrix<f64>, DVector<f64>) {
        let phi = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.2, 0.0, 0.1, 1.0, 0.3, 0.0, 0.4, 1.0, 0.5, 0.5, 0.5],
        );
        (phi, DVector::from_vec(vec![1.0, -1.0, 0.5, 0.2]))
    }

    #[test]
    fn unregularized_limit_is_least_squares() {
        let (phi, y) = small_problem();
        let fit = train_linearized_ridge(&phi, &y, 0.0, &RidgeOptions::default()).unwrap();
        let ls = (phi.transpose() * &phi).cholesky().unwrap().solve(&(phi.transpose() * &y));
        assert!((&fit.delta - ls).amax() < 1e-7);
        assert!(fit.grad_norm <= 1e-8);
    }

    #[test]
    fn ridge_matches_krr_in_primal() {
        let (phi, y) = small_problem();
        let fit = train_linearized_ridge(&phi, &y, 0.3, &RidgeOptions::default()).unwrap();
        let c = krr_solve(&gram(&phi), &y, 0.3).unwrap();
        assert!((&phi * &fit.delta - gram(&phi) * c).amax() < 1e-7);
    }

    #[test]
    fn learning_rate_is_validated() {
        let (phi, y) = small_problem();
        let opts = RidgeOptions {
            lr: Some(100.0),
            ..RidgeOptions::default()
        };
        assert!(matches!(
            train_linearized_ridge(&phi, &y, 0.0, &opts),
            Err(MixoutError::InvalidParameter(_))
        ));
    }

    #[test]
    fn test_param_modes() {
        let phi = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let d = DVector::from_vec(vec![0.5, 0.25]);
        assert_eq!(predict(&phi, &d, TestParams::Expected, 0.5)[0], 1.0);
        assert_eq!(predict(&phi, &d, TestParams::MaskOnes, 0.5)[0], 2.0);
    }

    #[test]
    fn small_theorem2_run_is_close() {
        let cfg = Theorem2Config {
            width: 256,
            n_test: 10,
            sgd: SgdOptions {
                steps: 3000,
                ..SgdOptions::default()
            },
            ..Theorem2Config::default()
        };
        let r = theorem2_experiment(&cfg).unwrap();
        assert!(r.ridge_rmse <= 1e-3, "{r:?}");
        assert!(r.mixout_rmse <= 5e-2, "{r:?}");
    }
}
