//! Numerical checks of mixout regularization on small models.
//!
//! Mixout keeps each parameter with probability μ and otherwise swaps in the
//! pretrained value, rescaled so the expected parameter is unchanged:
//! Φ(w; u, M) = u + M(w − u)/μ.

mod krr;
mod probe;
mod tangent;
mod theorem1;
mod train;
mod verify;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

pub use krr::{gram, krr_predict, krr_solve, KernelSystem};
pub use probe::{noise_robustness_probe, ProbeConfig, ProbeRow, ProbeTable};
pub use tangent::{
    finite_difference_error, ntk_features, LinearModel, TangentModel, ZeroInitHead, ANCHOR_TOLERANCE,
};
pub use theorem1::{
    monte_carlo_expected_loss, theorem1_equality_check, theorem1_log_cosh_check, MonteCarloEstimate,
    Theorem1Check,
};
pub use train::{
    predict, theorem2_experiment, train_linearized_ridge, train_stochastic_mixout, RidgeFit, RidgeOptions,
    SgdOptions, TestParams, Theorem2Config, Theorem2Result,
};
pub use verify::{verify_all, VerificationCheck, VerificationReport, VerifyConfig};

#[derive(Debug, thiserror::Error)]
pub enum MixoutError {
    #[error("p_replace must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("μ must be positive")]
    ZeroMu,
    #[error("dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("mask entries must be 0 or 1")]
    InvalidMask,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("anchor output {0:e} is not zero")]
    NonZeroAnchor(f64),
    #[error("kernel matrix is not symmetric")]
    NotSymmetric,
    #[error("K + λ²I is singular")]
    Singular,
    #[error("gradient descent diverged at step {step}")]
    Diverged { step: usize },
    #[error("gradient norm {grad_norm:e} above tolerance after {steps} steps")]
    NotConverged { steps: usize, grad_norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Mask moments derived from the replacement probability. Mᵢ ~ Bernoulli(μ)
/// with μ = 1 − p_replace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct MixoutConfig {
    p_replace: f64,
    m: f64,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    p_replace: f64,
    #[serde(default = "one")]
    m: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawConfig> for MixoutConfig {
    type Error = MixoutError;
    fn try_from(r: RawConfig) -> Result<Self, MixoutError> {
        MixoutConfig::new(r.p_replace, r.m)
    }
}

impl From<MixoutConfig> for RawConfig {
    fn from(c: MixoutConfig) -> Self {
        RawConfig {
            p_replace: c.p_replace,
            m: c.m,
        }
    }
}

impl MixoutConfig {
    pub fn new(p_replace: f64, m: f64) -> Result<Self, MixoutError> {
        if !(p_replace > 0.0 && p_replace < 1.0) {
            return Err(MixoutError::InvalidProbability(p_replace));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(MixoutError::InvalidParameter(format!("m must be positive, got {m}")));
        }
        Ok(MixoutConfig { p_replace, m })
    }

    pub fn p_replace(&self) -> f64 {
        self.p_replace
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn mu(&self) -> f64 {
        1.0 - self.p_replace
    }

    pub fn sigma2(&self) -> f64 {
        self.p_replace * (1.0 - self.p_replace)
    }

    /// λ² = mσ²/μ².
    pub fn lambda2(&self) -> f64 {
        self.m * self.sigma2() / (self.mu() * self.mu())
    }
}

/// Current parameters `w` and anchor (pretrained) parameters `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    w: Vec<f64>,
    u: Vec<f64>,
}

impl ParamVector {
    pub fn new(w: Vec<f64>, u: Vec<f64>) -> Result<Self, MixoutError> {
        if w.len() != u.len() {
            return Err(MixoutError::DimensionMismatch(w.len(), u.len()));
        }
        if w.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(MixoutError::NonFinite("parameter"));
        }
        Ok(ParamVector { w, u })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn delta(&self) -> Vec<f64> {
        self.w.iter().zip(&self.u).map(|(w, u)| w - u).collect()
    }
}

/// Φ = μ⁻¹(Mw + (I−M)u − (1−μ)u), evaluated as u + M(w−u)/μ.
pub fn apply_mixout(pv: &ParamVector, mask: &[u8], mu: f64) -> Result<Vec<f64>, MixoutError> {
    if mu <= 0.0 {
        return Err(MixoutError::ZeroMu);
    }
    if mask.len() != pv.dim() {
        return Err(MixoutError::DimensionMismatch(mask.len(), pv.dim()));
    }
    if mask.iter().any(|&m| m > 1) {
        return Err(MixoutError::InvalidMask);
    }
    Ok(pv
        .w
        .iter()
        .zip(&pv.u)
        .zip(mask)
        .map(|((&w, &u), &m)| if m == 1 { u + (w - u) / mu } else { u })
        .collect())
}

/// Indices i with Mᵢ = 0 for a Bernoulli(1 − p_replace) mask of length `dim`,
/// drawn by geometric skipping so the cost scales with the number of zeros.
pub fn sample_dropped(dim: usize, p_replace: f64, rng: &mut crate::seed::Rng) -> Vec<usize> {
    let gap = Geometric::new(p_replace).expect("p_replace in (0, 1)");
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let skip = gap.sample(rng);
        match usize::try_from(skip).ok().and_then(|s| i.checked_add(s)) {
            Some(idx) if idx < dim => {
                out.push(idx);
                i = idx + 1;
            }
            _ => break,
        }
    }
    out
}

/// A dense 0/1 mask with Mᵢ ~ Bernoulli(1 − p_replace).
pub fn sample_mask(dim: usize, p_replace: f64, rng: &mut crate::seed::Rng) -> Vec<u8> {
    let mut mask = vec![1u8; dim];
    for i in sample_dropped(dim, p_replace, rng) {
        mask[i] = 0;
    }
    mask
}

fn random_vector(rng: &mut crate::seed::Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}
