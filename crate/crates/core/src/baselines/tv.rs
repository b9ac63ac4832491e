use crate::error::{invalid, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvConfig {
    /// Smoothing of the absolute value, `√(d² + ε²) − ε`.
    pub eps: f64,
    pub weight: f64,
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return invalid(format!("TV smoothing must be positive, got {}", self.eps));
        }
        if !(self.weight >= 0.0) {
            return invalid(format!("TV weight must be >= 0, got {}", self.weight));
        }
        Ok(())
    }
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            weight: 0.0,
        }
    }
}

/// Smoothed anisotropic total variation over horizontal and vertical
/// neighbour pairs, and its gradient.
pub fn tv_value_and_grad(x: &Matrix, eps: f64) -> (f64, Matrix) {
    let (m, n) = x.shape();
    let mut value = 0.0;
    let mut grad = Matrix::zeros(m, n);
    let mut pair = |a: (usize, usize), b: (usize, usize), grad: &mut Matrix| {
        let d = x[b] - x[a];
        let r = (d * d + eps * eps).sqrt();
        value += r - eps;
        let g = d / r;
        grad[b] += g;
        grad[a] -= g;
    };
    for i in 0..m {
        for j in 0..n {
            if j + 1 < n {
                pair((i, j), (i, j + 1), &mut grad);
            }
            if i + 1 < m {
                pair((i, j), (i + 1, j), &mut grad);
            }
        }
    }
    (value, grad)
}
