//! Precision and recall for distributions (PRD) over clustered embeddings.
//!
//! Both sample sets are clustered jointly; P is the cluster histogram of the
//! real set and Q that of the generated set. For a slope λ,
//! α(λ) = Σ min(λ Pᵢ, Qᵢ) is precision and β(λ) = α(λ)/λ is recall.

use serde::{Deserialize, Serialize};

use super::{kmeans, EmbeddingMatrix, KMeansConfig, MetricsError};

const ANGLE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrdConfig {
    pub num_clusters: usize,
    pub num_angles: usize,
    /// Independent clusterings whose curves are averaged.
    pub num_runs: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PrdConfig {
    fn default() -> Self {
        PrdConfig {
            num_clusters: 20,
            num_angles: 1001,
            num_runs: 10,
            max_iter: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrdCurve {
    /// (precision α, recall β) per slope, in increasing slope order.
    pub points: Vec<(f64, f64)>,
    pub num_clusters: usize,
    /// (max F_{1/8}, max F_8).
    pub summary: (f64, f64),
}

/// Slopes tan(θ) for θ evenly spaced over (0, π/2).
pub fn ratio_grid(num_angles: usize) -> Vec<f64> {
    let lo = ANGLE_EPSILON;
    let hi = std::f64::consts::FRAC_PI_2 - ANGLE_EPSILON;
    match num_angles {
        0 => Vec::new(),
        1 => vec![lo.tan()],
        _ => (0..num_angles)
            .map(|i| (lo + (hi - lo) * i as f64 / (num_angles - 1) as f64).tan())
            .collect(),
    }
}

fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    if p + r == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / (b2 * p + r)
    }
}

fn summarize(points: &[(f64, f64)]) -> (f64, f64) {
    let max_f = |beta| {
        points
            .iter()
            .map(|&(p, r)| f_beta(p, r, beta))
            .fold(0.0, f64::max)
    };
    (max_f(1.0 / 8.0), max_f(8.0))
}

/// The curve for fixed histograms `p` (real) and `q` (generated).
pub fn prd_from_histograms(p: &[f64], q: &[f64], num_angles: usize) -> Result<Vec<(f64, f64)>, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch(p.len(), q.len()));
    }
    if p.iter().chain(q).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(MetricsError::InvalidParameter(
            "histogram entries must be finite and non-negative".into(),
        ));
    }
    Ok(ratio_grid(num_angles)
        .into_iter()
        .map(|slope| {
            let alpha: f64 = p.iter().zip(q).map(|(&pi, &qi)| (slope * pi).min(qi)).sum();
            let beta = alpha / slope;
            (alpha.clamp(0.0, 1.0), beta.clamp(0.0, 1.0))
        })
        .collect())
}

fn histogram(labels: &[usize], k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k];
    for &l in labels {
        h[l] += 1.0;
    }
    let n = labels.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// PRD of `generated` against `real`.
pub fn prd_curve(real: &EmbeddingMatrix, generated: &EmbeddingMatrix, config: &PrdConfig) -> Result<PrdCurve, MetricsError> {
    let k = config.num_clusters;
    if real.cols() != generated.cols() {
        return Err(MetricsError::DimensionMismatch(real.cols(), generated.cols()));
    }
    for (what, m) in [("PRD real set", real), ("PRD generated set", generated)] {
        if m.rows() < k {
            return Err(MetricsError::TooFewSamples {
                what,
                need: k,
                got: m.rows(),
            });
        }
    }
    if config.num_runs == 0 || config.num_angles == 0 {
        return Err(MetricsError::InvalidParameter(
            "num_runs and num_angles must be positive".into(),
        ));
    }

    let union = real.vstack(generated)?;
    let mut sum = vec![(0.0, 0.0); config.num_angles];
    for run in 0..config.num_runs {
        let clusters = kmeans(
            &union,
            KMeansConfig {
                k,
                max_iter: config.max_iter,
                seed: crate::seed::derive_seed(config.seed, run as u64),
            },
        )?;
        let (r, g) = clusters.assignments.split_at(real.rows());
        let curve = prd_from_histograms(&histogram(r, k), &histogram(g, k), config.num_angles)?;
        for (acc, (a, b)) in sum.iter_mut().zip(curve) {
            acc.0 += a;
            acc.1 += b;
        }
    }
    let runs = config.num_runs as f64;
    let points: Vec<(f64, f64)> = sum.into_iter().map(|(a, b)| (a / runs, b / runs)).collect();
    Ok(PrdCurve {
        summary: summarize(&points),
        points,
        num_clusters: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spans_the_quarter_circle() {
        let g = ratio_grid(1001);
        assert_eq!(g.len(), 1001);
        assert!(g[0] > 0.0 && g[0] < 1e-9);
        assert!(g[1000] > 1e9);
        assert!((g[500] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identical_histograms_reach_the_corner() {
        let h = [0.2, 0.3, 0.5];
        let curve = prd_from_histograms(&h, &h, 1001).unwrap();
        let (p, r) = summarize(&curve);
        assert!(p > 0.999 && r > 0.999);
    }

    #[test]
    fn monotone_in_opposite_directions() {
        let curve = prd_from_histograms(&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5], 201).unwrap();
        for w in curve.windows(2) {
            assert!(w[0].0 <= w[1].0);
            assert!(w[0].1 >= w[1].1);
        }
        assert!(curve.iter().all(|&(a, b)| (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)));
    }

    #[test]
    fn f_beta_weights() {
        assert_eq!(f_beta(0.0, 0.0, 8.0), 0.0);
        // F_8 is dominated by recall, F_1/8 by precision
        assert!(f_beta(0.1, 1.0, 8.0) > 0.8);
        assert!(f_beta(1.0, 0.1, 1.0 / 8.0) > 0.8);
    }

    #[test]
    fn validation() {
        let m = EmbeddingMatrix::from_rows(&vec![vec![0.0]; 5]).unwrap();
        let cfg = PrdConfig { num_clusters: 6, ..PrdConfig::default() };
        assert!(matches!(
            prd_curve(&m, &m, &cfg),
            Err(MetricsError::TooFewSamples { .. })
        ));
        assert!(prd_from_histograms(&[0.5], &[0.5, 0.5], 3).is_err());
        assert!(prd_from_histograms(&[-0.5], &[0.5], 3).is_err());
    }
}
