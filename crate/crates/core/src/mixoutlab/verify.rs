//! The full battery of numerical checks, as a JSON-serializable report.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_mixout, finite_difference_error, monte_carlo_expected_loss, random_vector, sample_dropped,
    theorem1_equality_check, theorem1_log_cosh_check, theorem2_experiment, KernelSystem, MixoutConfig,
    MixoutError, ParamVector, ProbeConfig, Theorem2Config, ZeroInitHead,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationCheck {
    pub name: String,
    /// Measured discrepancy; the check passes when it is at most `tolerance`.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<VerificationCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub dim: usize,
    pub configs: usize,
    pub mc_samples: usize,
    pub fd_width: usize,
    pub fd_inputs: usize,
    pub theorem2: Theorem2Config,
    pub probe: ProbeConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            dim: 50,
            configs: 100,
            mc_samples: 1_000_000,
            fd_width: 32,
            fd_inputs: 20,
            theorem2: Theorem2Config::default(),
            probe: ProbeConfig::default(),
        }
    }
}

fn check(name: &str, measured: f64, tolerance: f64) -> VerificationCheck {
    VerificationCheck {
        name: name.to_owned(),
        measured,
        tolerance,
        passed: measured <= tolerance,
    }
}

/// |mean − Σw| / SE for the scalar Σᵢ Φᵢ over `samples` random masks,
/// whose expectation is Σᵢ wᵢ.
fn expected_mixture_z(pv: &ParamVector, config: &MixoutConfig, samples: usize, seed: u64) -> f64 {
    let mu = config.mu();
    let delta = pv.delta();
    let all_kept: f64 = pv.u().iter().zip(&delta).map(|(u, d)| u + d / mu).sum();
    let target: f64 = pv.w().iter().sum();
    let mut rng = crate::seed::rng(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for n in 1..=samples {
        let mut s = all_kept;
        for i in sample_dropped(pv.dim(), config.p_replace(), &mut rng) {
            s -= delta[i] / mu;
        }
        let dx = s - mean;
        mean += dx / n as f64;
        m2 += dx * (s - mean);
    }
    let se = (m2 / (samples - 1) as f64 / samples as f64).sqrt();
    (mean - target).abs() / se
}

pub fn verify_all(cfg: &VerifyConfig) -> Result<VerificationReport, MixoutError> {
    let mut rng = crate::seed::rng(cfg.seed);
    let mut checks = Vec::new();
    let d = cfg.dim;

    // mixture function against its literal definition
    let mut identity_gap: f64 = 0.0;
    for _ in 0..cfg.configs {
        let pv = ParamVector::new(random_vector(&mut rng, d, 1.0), random_vector(&mut rng, d, 1.0))?;
        let mu = rng.random_range(0.05..1.0);
        let mask: Vec<u8> = (0..d).map(|_| u8::from(rng.random_bool(mu))).collect();
        let phi = apply_mixout(&pv, &mask, mu)?;
        for i in 0..d {
            let m = mask[i] as f64;
            let literal = (m * pv.w()[i] + (1.0 - m) * pv.u()[i] - (1.0 - mu) * pv.u()[i]) / mu;
            identity_gap = identity_gap.max((phi[i] - literal).abs());
        }
    }
    checks.push(check("mixture_identity", identity_gap, 1e-12));

    let pv = ParamVector::new(random_vector(&mut rng, d, 1.0), random_vector(&mut rng, d, 1.0))?;
    let config = MixoutConfig::new(0.3, 1.0)?;
    let z = expected_mixture_z(&pv, &config, cfg.mc_samples, rng.random());
    checks.push(check("expected_mixture_monte_carlo_z", z, 3.0));

    let mut max_gap: f64 = 0.0;
    let mut min_log_cosh_gap = f64::INFINITY;
    for _ in 0..cfg.configs {
        let pv = ParamVector::new(random_vector(&mut rng, d, 1.0), random_vector(&mut rng, d, 1.0))?;
        let target = random_vector(&mut rng, d, 1.0);
        // p_replace near 1 blows δ/μ up until rounding alone exceeds the
        // tolerance, so stay in the range mixout is used in
        let config = MixoutConfig::new(rng.random_range(0.01..0.5), 1.0)?;
        max_gap = max_gap.max(theorem1_equality_check(&pv, &target, &config)?.gap);
        let centers = random_vector(&mut rng, d, 1.0);
        min_log_cosh_gap = min_log_cosh_gap.min(theorem1_log_cosh_check(&pv, &target, &centers, &config)?.gap);
    }
    checks.push(check("theorem1_quadratic_gap", max_gap, 1e-12));
    checks.push(check("theorem1_log_cosh_violation", (-min_log_cosh_gap).max(0.0), 1e-9));

    let target = random_vector(&mut rng, d, 1.0);
    let exact = theorem1_equality_check(&pv, &target, &config)?.lhs;
    let mc = monte_carlo_expected_loss(&pv, &target, &config, cfg.mc_samples, rng.random())?;
    checks.push(check("theorem1_monte_carlo_z", (mc.mean - exact).abs() / mc.std_error, 3.0));

    let head = ZeroInitHead::new(cfg.fd_width, 8, 1, rng.random());
    let fd = (0..cfg.fd_inputs)
        .map(|_| finite_difference_error(&head, &random_vector(&mut rng, 8, 2.0), 1e-5))
        .fold(0.0, f64::max);
    checks.push(check("ntk_finite_difference", fd, 1e-5));

    let a = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
    let sys = KernelSystem::new(&a * a.transpose(), DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0)), 0.1)?;
    checks.push(check("krr_residual", sys.residual(&sys.solve()?), 1e-10));

    let t2 = theorem2_experiment(&cfg.theorem2)?;
    checks.push(check("theorem2_ridge_rmse", t2.ridge_rmse, 1e-3));
    checks.push(check("theorem2_mixout_rmse", t2.mixout_rmse, 5e-2));

    let probe = cfg.probe.run()?;
    let violations = probe
        .rows
        .windows(2)
        .filter(|w| w[1].train_mse_noisy < w[0].train_mse_noisy)
        .count();
    checks.push(check("noise_probe_fit_monotone_violations", violations as f64, 0.0));
    let unregularized = probe.rows[0].test_mse_clean;
    let best = probe.best_regularized().map_or(f64::INFINITY, |r| r.test_mse_clean);
    checks.push(check("noise_probe_regularized_minus_unregularized", best - unregularized, 0.0));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport { checks, passed })
}
