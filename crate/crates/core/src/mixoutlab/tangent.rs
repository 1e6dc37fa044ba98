//! Small differentiable models and their tangent (NTK) features.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::MixoutError;

/// Anchor outputs must vanish to this tolerance.
pub const ANCHOR_TOLERANCE: f64 = 1e-12;

/// A model f(x; θ) with exact parameter gradients.
pub trait TangentModel {
    fn num_params(&self) -> usize;
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Anchor (pretrained) parameters u.
    fn anchor(&self) -> &[f64];
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64>;
    /// ∇_θ f_k(x; θ) for output k.
    fn gradient(&self, params: &[f64], x: &[f64], output: usize) -> Vec<f64>;
}

/// f(x; θ) = θᵀx with anchor θ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    anchor: Vec<f64>,
}

impl LinearModel {
    pub fn new(dim: usize) -> Self {
        LinearModel { anchor: vec![0.0; dim] }
    }
}

impl TangentModel for LinearModel {
    fn num_params(&self) -> usize {
        self.anchor.len()
    }
    fn in_dim(&self) -> usize {
        self.anchor.len()
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn anchor(&self) -> &[f64] {
        &self.anchor
    }
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        vec![params.iter().zip(x).map(|(p, x)| p * x).sum()]
    }
    fn gradient(&self, _params: &[f64], x: &[f64], _output: usize) -> Vec<f64> {
        x.to_vec()
    }
}

/// Difference of two identical two-layer tanh networks,
/// f(x) = c·(g(x; θ_a) − g(x; θ_b)) with g(x) = V tanh(Wx/√d_in)/√width.
/// Both halves start from the same draw, so the anchor output is exactly 0
/// while the gradient is not.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroInitHead {
    width: usize,
    in_dim: usize,
    out_dim: usize,
    scale: f64,
    anchor: Vec<f64>,
}

impl ZeroInitHead {
    pub fn new(width: usize, in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = crate::seed::rng(seed);
        let half: Vec<f64> = (0..width * in_dim + out_dim * width)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut anchor = half.clone();
        anchor.extend_from_slice(&half);
        ZeroInitHead {
            width,
            in_dim,
            out_dim,
            scale: 1.0,
            anchor,
        }
    }

    /// Multiply the network output (and so every gradient) by `scale`.
    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn output_scale(&self) -> f64 {
        self.scale
    }

    fn half_len(&self) -> usize {
        self.width * self.in_dim + self.out_dim * self.width
    }

    fn hidden(&self, half: &[f64], x: &[f64]) -> Vec<f64> {
        let norm = (self.in_dim as f64).sqrt();
        half[..self.width * self.in_dim]
            .chunks_exact(self.in_dim)
            .map(|w| (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / norm).tanh())
            .collect()
    }

    fn half_forward(&self, half: &[f64], x: &[f64]) -> Vec<f64> {
        let h = self.hidden(half, x);
        let v = &half[self.width * self.in_dim..];
        let norm = (self.width as f64).sqrt();
        v.chunks_exact(self.width)
            .map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() / norm)
            .collect()
    }

    fn half_gradient(&self, half: &[f64], x: &[f64], k: usize) -> Vec<f64> {
        let h = self.hidden(half, x);
        let split = self.width * self.in_dim;
        let v = &half[split + k * self.width..split + (k + 1) * self.width];
        let nw = (self.width as f64).sqrt();
        let nwd = nw * (self.in_dim as f64).sqrt();
        let mut g = vec![0.0; self.half_len()];
        for j in 0..self.width {
            let coef = v[j] * (1.0 - h[j] * h[j]) / nwd;
            for (gi, xi) in g[j * self.in_dim..(j + 1) * self.in_dim].iter_mut().zip(x) {
                *gi = coef * xi;
            }
            g[split + k * self.width + j] = h[j] / nw;
        }
        g
    }
}

impl TangentModel for ZeroInitHead {
    fn num_params(&self) -> usize {
        2 * self.half_len()
    }
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn anchor(&self) -> &[f64] {
        &self.anchor
    }
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let (a, b) = params.split_at(self.half_len());
        self.half_forward(a, x)
            .into_iter()
            .zip(self.half_forward(b, x))
            .map(|(fa, fb)| self.scale * (fa - fb))
            .collect()
    }
    fn gradient(&self, params: &[f64], x: &[f64], output: usize) -> Vec<f64> {
        let (a, b) = params.split_at(self.half_len());
        let mut g: Vec<f64> = self
            .half_gradient(a, x, output)
            .into_iter()
            .map(|v| self.scale * v)
            .collect();
        g.extend(self.half_gradient(b, x, output).into_iter().map(|v| -self.scale * v));
        g
    }
}

/// Row `i·out_dim + k` is ∇_θ f_k(x_i; u).
pub fn ntk_features<M: TangentModel>(model: &M, inputs: &[Vec<f64>]) -> Result<DMatrix<f64>, MixoutError> {
    let (p, k) = (model.num_params(), model.out_dim());
    let mut phi = DMatrix::zeros(inputs.len() * k, p);
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != model.in_dim() {
            return Err(MixoutError::DimensionMismatch(x.len(), model.in_dim()));
        }
        for &f in &model.forward(model.anchor(), x) {
            if f.abs() > ANCHOR_TOLERANCE {
                return Err(MixoutError::NonZeroAnchor(f));
            }
        }
        for out in 0..k {
            let g = model.gradient(model.anchor(), x, out);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(MixoutError::NonFinite("gradient"));
            }
            phi.row_mut(i * k + out).copy_from_slice(&g);
        }
    }
    Ok(phi)
}

/// Largest relative error ‖g_fd − g‖₂ / ‖g‖₂ over outputs, where g_fd uses
/// central differences with step `h` at the anchor.
pub fn finite_difference_error<M: TangentModel>(model: &M, x: &[f64], h: f64) -> f64 {
    let mut params = model.anchor().to_vec();
    let p = params.len();
    let k = model.out_dim();
    let mut fd = vec![vec![0.0; p]; k];
    for j in 0..p {
        let orig = params[j];
        params[j] = orig + h;
        let plus = model.forward(&params, x);
        params[j] = orig - h;
        let minus = model.forward(&params, x);
        params[j] = orig;
        for out in 0..k {
            fd[out][j] = (plus[out] - minus[out]) / (2.0 * h);
        }
    }
    (0..k)
        .map(|out| {
            let g = model.gradient(model.anchor(), x, out);
            let err: f64 = g.iter().zip(&fd[out]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let norm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            err / norm.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn inputs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::seed::rng(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn linear_features_are_inputs() {
        let x = inputs(4, 3, 0);
        let phi = ntk_features(&LinearModel::new(3), &x).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(phi[(i, j)], x[i][j]);
            }
        }
    }

    #[test]
    fn head_is_zero_at_anchor_with_nonzero_gradient() {
        let m = ZeroInitHead::new(16, 4, 2, 3);
        for x in inputs(10, 4, 1) {
            assert!(m.forward(m.anchor(), &x).iter().all(|f| f.abs() <= ANCHOR_TOLERANCE));
            let g = m.gradient(m.anchor(), &x, 1);
            assert!(g.iter().map(|v| v * v).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = ZeroInitHead::new(12, 3, 2, 7).with_output_scale(0.7);
        for x in inputs(5, 3, 2) {
            assert!(finite_difference_error(&m, &x, 1e-5) < 1e-6);
        }
    }

    #[test]
    fn seeds_and_duplicates() {
        let x = inputs(3, 4, 5);
        let a = ntk_features(&ZeroInitHead::new(8, 4, 1, 1), &x).unwrap();
        let b = ntk_features(&ZeroInitHead::new(8, 4, 1, 2), &x).unwrap();
        assert_ne!(a, b);
        let dup = vec![x[0].clone(), x[0].clone()];
        let d = ntk_features(&ZeroInitHead::new(8, 4, 1, 1), &dup).unwrap();
        assert_eq!(d.row(0), d.row(1));
    }

    #[test]
    fn nonzero_anchor_is_rejected() {
        struct Offset;
        impl TangentModel for Offset {
            fn num_params(&self) -> usize { 1 }
            fn in_dim(&self) -> usize { 1 }
            fn out_dim(&self) -> usize { 1 }
            fn anchor(&self) -> &[f64] { &[1.0] }
            fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> { vec![p[0] * x[0]] }
            fn gradient(&self, _: &[f64], x: &[f64], _: usize) -> Vec<f64> { x.to_vec() }
        }
        assert!(matches!(
            ntk_features(&Offset, &[vec![2.0]]),
            Err(MixoutError::NonZeroAnchor(_))
        ));
    }
}
