//! Kendall tau-b rank correlation.

use std::cmp::Ordering;

use super::MetricsError;

fn check(xs: &[f64], ys: &[f64]) -> Result<(), MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            what: "Kendall tau",
            need: 2,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite("Kendall tau input"));
    }
    Ok(())
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite")
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair counts: all pairs, pairs tied in x, tied in y, tied in both, and
/// discordant pairs.
#[derive(Debug, PartialEq, Eq)]
struct PairCounts {
    n0: u64,
    tied_x: u64,
    tied_y: u64,
    tied_xy: u64,
    discordant: u64,
}

impl PairCounts {
    fn tau(&self) -> Result<f64, MetricsError> {
        let concordant_minus_discordant = (self.n0 + self.tied_xy) as i64
            - (self.tied_x + self.tied_y) as i64
            - 2 * self.discordant as i64;
        let denom = ((self.n0 - self.tied_x) as f64 * (self.n0 - self.tied_y) as f64).sqrt();
        if denom == 0.0 {
            return Err(MetricsError::UndefinedCorrelation);
        }
        Ok(concordant_minus_discordant as f64 / denom)
    }
}

fn run_ties<T>(sorted: &[T], same: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += pairs(run);
            run = 1;
        }
    }
    total + pairs(run)
}

/// Stable merge sort of `v` by value, returning the number of strict
/// inversions.
fn sort_count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = sort_count_inversions(&mut v[..mid], buf) + sort_count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    check(xs, ys)?;
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));
    let tied_x = run_ties(&pts, |a, b| a.0 == b.0);
    let tied_xy = run_ties(&pts, |a, b| a.0 == b.0 && a.1 == b.1);

    // with x sorted (ties broken by y), every strict y-inversion is a
    // discordant pair
    let mut y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(y.len());
    let discordant = sort_count_inversions(&mut y, &mut buf);
    let tied_y = run_ties(&y, |a, b| a == b);

    PairCounts {
        n0: pairs(xs.len() as u64),
        tied_x,
        tied_y,
        tied_xy,
        discordant,
    }
    .tau()
}

/// Tau-b by enumerating all pairs; O(n²), used as a reference.
pub fn kendall_tau_naive(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    check(xs, ys)?;
    let n = xs.len();
    let mut c = PairCounts {
        n0: pairs(n as u64),
        tied_x: 0,
        tied_y: 0,
        tied_xy: 0,
        discordant: 0,
    };
    for i in 0..n {
        for j in i + 1..n {
            let sx = cmp(xs[i], xs[j]);
            let sy = cmp(ys[i], ys[j]);
            match (sx, sy) {
                (Ordering::Equal, Ordering::Equal) => {
                    c.tied_x += 1;
                    c.tied_y += 1;
                    c.tied_xy += 1;
                }
                (Ordering::Equal, _) => c.tied_x += 1,
                (_, Ordering::Equal) => c.tied_y += 1,
                _ if sx != sy => c.discordant += 1,
                _ => {}
            }
        }
    }
    c.tau()
}
