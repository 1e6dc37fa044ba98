//! Seeded Lloyd k-means with k-means++ initialization.

use rand::Rng;

use super::{EmbeddingMatrix, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// k×d centroids, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.chunks_exact(d.max(1)).enumerate() {
        let dist = sq_dist(point, centre);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus_init(data: &EmbeddingMatrix, k: usize, rng: &mut crate::seed::Rng) -> Vec<f64> {
    let n = data.rows();
    let mut centroids = Vec::with_capacity(k * data.cols());
    centroids.extend_from_slice(data.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = data.iter_rows().map(|r| sq_dist(r, &centroids)).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            // every point coincides with a centroid already
            rng.random_range(0..n)
        };
        let row = data.row(pick);
        for (slot, r) in d2.iter_mut().zip(data.iter_rows()) {
            *slot = slot.min(sq_dist(r, row));
        }
        centroids.extend_from_slice(row);
    }
    centroids
}

pub fn kmeans(data: &EmbeddingMatrix, config: KMeansConfig) -> Result<KMeansResult, MetricsError> {
    let (n, d, k) = (data.rows(), data.cols(), config.k);
    if k == 0 {
        return Err(MetricsError::InvalidParameter("k must be positive".into()));
    }
    if n < k {
        return Err(MetricsError::TooFewSamples {
            what: "k-means",
            need: k,
            got: n,
        });
    }
    let mut rng = crate::seed::rng(config.seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let mut changed = false;
        for (a, row) in assignments.iter_mut().zip(data.iter_rows()) {
            let (c, _) = nearest(row, &centroids, d);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (&a, row) in assignments.iter().zip(data.iter_rows()) {
            counts[a] += 1;
            for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }

    Ok(KMeansResult {
        centroids,
        assignments,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_clusters() {
        let mut rows = Vec::new();
        for i in 0..30 {
            let j = i as f64 * 0.01;
            rows.push(vec![j, 0.0]);
            rows.push(vec![100.0 + j, 0.0]);
            rows.push(vec![0.0, 100.0 + j]);
        }
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        let r = kmeans(&data, KMeansConfig { k: 3, max_iter: 100, seed: 4 }).unwrap();
        for g in 0..3 {
            let first = r.assignments[g];
            assert!((0..30).all(|i| r.assignments[3 * i + g] == first));
        }
        let mut labels = r.assignments[..3].to_vec();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 3);
    }

    #[test]
    fn deterministic_and_validated() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        let cfg = KMeansConfig { k: 4, max_iter: 50, seed: 9 };
        assert_eq!(kmeans(&data, cfg).unwrap(), kmeans(&data, cfg).unwrap());
        assert!(kmeans(&data, KMeansConfig { k: 51, ..cfg }).is_err());
        assert!(kmeans(&data, KMeansConfig { k: 0, ..cfg }).is_err());
    }

    #[test]
    fn identical_points() {
        let data = EmbeddingMatrix::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        let r = kmeans(&data, KMeansConfig { k: 3, max_iter: 10, seed: 0 }).unwrap();
        assert_eq!(r.assignments, vec![0; 5]);
    }
}
