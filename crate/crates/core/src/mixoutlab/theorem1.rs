//! Expected loss under mixout versus the L2-penalized loss.
//!
//! For L(θ) = (m/2)‖θ − θ*‖² the two agree exactly:
//! E[L(Φ)] = L(w) + (mσ²/2μ²)‖w − u‖². For other m-strongly convex losses
//! the left side is an upper bound on the right.

use serde::{Deserialize, Serialize};

use super::{sample_dropped, MixoutConfig, MixoutError, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

fn check_dims(pv: &ParamVector, target: &[f64]) -> Result<(), MixoutError> {
    if target.len() != pv.dim() {
        return Err(MixoutError::DimensionMismatch(target.len(), pv.dim()));
    }
    Ok(())
}

fn penalty(pv: &ParamVector, config: &MixoutConfig) -> f64 {
    let mu = config.mu();
    let norm2: f64 = pv.delta().iter().map(|d| d * d).sum();
    config.m() * config.sigma2() / (2.0 * mu * mu) * norm2
}

fn quadratic(theta: &[f64], target: &[f64], m: f64) -> f64 {
    0.5 * m * theta.iter().zip(target).map(|(t, s)| (t - s) * (t - s)).sum::<f64>()
}

/// Closed-form E[L(Φ)] for L = (m/2)‖θ − θ*‖², from the first two mask
/// moments: Φᵢ − θ*ᵢ = aᵢ + Mᵢδᵢ/μ with a = u − θ*, δ = w − u.
pub fn theorem1_equality_check(
    pv: &ParamVector,
    target: &[f64],
    config: &MixoutConfig,
) -> Result<Theorem1Check, MixoutError> {
    check_dims(pv, target)?;
    let (mu, s2) = (config.mu(), config.sigma2());
    let (e_m, e_m2) = (mu, mu * mu + s2);
    let lhs = 0.5
        * config.m()
        * pv.u()
            .iter()
            .zip(pv.w())
            .zip(target)
            .map(|((&u, &w), &t)| {
                let a = u - t;
                let d = w - u;
                a * a + 2.0 * a * d * e_m / mu + d * d * e_m2 / (mu * mu)
            })
            .sum::<f64>();
    let rhs = quadratic(pv.w(), target, config.m()) + penalty(pv, config);
    Ok(Theorem1Check {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

fn log_cosh(x: f64) -> f64 {
    // log(cosh x) = |x| + log1p(e^{-2|x|}) - log 2, stable for large |x|
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// L(θ) = (m/2)‖θ − θ*‖² + Σ log cosh(θᵢ − cᵢ), which is m-strongly convex.
/// E[L(Φ)] is exact: coordinates are independent two-point variables.
/// `gap` is lhs − rhs and should be non-negative.
pub fn theorem1_log_cosh_check(
    pv: &ParamVector,
    target: &[f64],
    centers: &[f64],
    config: &MixoutConfig,
) -> Result<Theorem1Check, MixoutError> {
    check_dims(pv, target)?;
    check_dims(pv, centers)?;
    let (mu, m) = (config.mu(), config.m());
    let coord = |theta: f64, t: f64, c: f64| 0.5 * m * (theta - t) * (theta - t) + log_cosh(theta - c);
    let mut lhs = 0.0;
    let mut loss_w = 0.0;
    for i in 0..pv.dim() {
        let (u, w, t, c) = (pv.u()[i], pv.w()[i], target[i], centers[i]);
        let kept = u + (w - u) / mu;
        lhs += mu * coord(kept, t, c) + (1.0 - mu) * coord(u, t, c);
        loss_w += coord(w, t, c);
    }
    let rhs = loss_w + penalty(pv, config);
    Ok(Theorem1Check { lhs, rhs, gap: lhs - rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample mean of (m/2)‖Φ − θ*‖² over random masks.
pub fn monte_carlo_expected_loss(
    pv: &ParamVector,
    target: &[f64],
    config: &MixoutConfig,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, MixoutError> {
    check_dims(pv, target)?;
    if samples < 2 {
        return Err(MixoutError::InvalidParameter("need at least 2 samples".into()));
    }
    let mu = config.mu();
    let half_m = 0.5 * config.m();
    let delta = pv.delta();
    // loss with every mask entry 1, corrected per dropped coordinate
    let kept: Vec<f64> = pv
        .u()
        .iter()
        .zip(&delta)
        .zip(target)
        .map(|((&u, &d), &t)| (u + d / mu - t).powi(2))
        .collect();
    let dropped: Vec<f64> = pv.u().iter().zip(target).map(|(&u, &t)| (u - t).powi(2)).collect();
    let all_kept: f64 = kept.iter().sum();

    let mut rng = crate::seed::rng(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for n in 1..=samples {
        let mut s = all_kept;
        for i in sample_dropped(pv.dim(), config.p_replace(), &mut rng) {
            s += dropped[i] - kept[i];
        }
        let x = half_m * s;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / samples as f64).sqrt(),
        samples,
    })
}
