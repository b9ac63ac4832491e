//! Deep matrix factorization `X = W⁽ᴸ⁻¹⁾ ··· W⁽¹⁾ W⁽⁰⁾`.
//!
//! `W⁽ᴸ⁻¹⁾` is `m×r`, inner factors are `r×r` and `W⁽⁰⁾` is `r×n`.

use crate::data::{lift_observed, SamplingMask};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, random_orthogonal, SeededRng};
use crate::svd::svd;

/// Ordered factors; `factors()[l]` is `W⁽ˡ⁾`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorChain {
    factors: Vec<Matrix>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// I.i.d. `N(0, variance)` entries.
    Gaussian { variance: f64 },
    /// Every factor equal to `alpha · I`. Square problems with `r = m = n` only.
    BalancedIdentity { alpha: f64 },
    /// Balanced factors built from the SVD of a random `m×n` matrix with
    /// `N(0, scale²)` entries, rotated by random orthogonal matrices.
    BalancedSpectral { scale: f64 },
}

impl FactorChain {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() < 2 {
            return invalid(format!("depth must be at least 2, got {}", factors.len()));
        }
        for l in 1..factors.len() {
            if factors[l].cols() != factors[l - 1].rows() {
                return invalid(format!(
                    "factor {l} is {:?} but factor {} is {:?}",
                    factors[l].shape(),
                    l - 1,
                    factors[l - 1].shape()
                ));
            }
        }
        if factors.iter().any(|w| !w.is_finite()) {
            return invalid("factor chain contains non-finite entries");
        }
        Ok(Self { factors })
    }

    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn width(&self) -> usize {
        self.factors[0].rows()
    }

    /// Shape `(m, n)` of the product.
    pub fn shape(&self) -> (usize, usize) {
        (
            self.factors[self.depth() - 1].rows(),
            self.factors[0].cols(),
        )
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    /// The product, associated left to right.
    pub fn forward(&self) -> Matrix {
        let mut it = self.factors.iter().rev();
        let mut x = it.next().expect("depth >= 2").clone();
        for w in it {
            x = x.matmul(w);
        }
        x
    }

    /// Per-factor gradients of `f(X)` given `g = ∂f/∂X`:
    /// `(Π_{j>l} W⁽ʲ⁾)ᵀ · g · (Π_{j<l} W⁽ʲ⁾)ᵀ`.
    pub fn chain_grad(&self, g: &Matrix) -> Vec<Matrix> {
        let depth = self.depth();
        assert_eq!(g.shape(), self.shape(), "gradient shape mismatch");
        // right[l] = W⁽ˡ⁻¹⁾ ··· W⁽⁰⁾ for l >= 1.
        let mut right: Vec<Option<Matrix>> = vec![None; depth];
        for l in 1..depth {
            right[l] = Some(match &right[l - 1] {
                None => self.factors[0].clone(),
                Some(r) => self.factors[l - 1].matmul(r),
            });
        }
        let mut grads = vec![Matrix::zeros(0, 0); depth];
        // left_t_g = (W⁽ᴸ⁻¹⁾ ··· W⁽ˡ⁺¹⁾)ᵀ g, built from the top down.
        let mut left_t_g = g.clone();
        for l in (0..depth).rev() {
            grads[l] = match &right[l] {
                None => left_t_g.clone(),
                Some(r) => left_t_g.matmul_t(r),
            };
            if l > 0 {
                left_t_g = self.factors[l].t_matmul(&left_t_g);
            }
        }
        grads
    }

    /// `‖W⁽ˡ⁺¹⁾ᵀW⁽ˡ⁺¹⁾ − W⁽ˡ⁾W⁽ˡ⁾ᵀ‖_F` for `l = 0 .. L−2`.
    pub fn balance_residuals(&self) -> Vec<f64> {
        self.factors
            .windows(2)
            .map(|p| {
                p[1].t_matmul(&p[1])
                    .sub(&p[0].matmul_t(&p[0]))
                    .frobenius_norm()
            })
            .collect()
    }
}

pub fn initialize(
    m: usize,
    n: usize,
    depth: usize,
    width: usize,
    scheme: InitScheme,
    rng: &mut SeededRng,
) -> Result<FactorChain> {
    if depth < 2 {
        return invalid(format!("depth must be at least 2, got {depth}"));
    }
    if m == 0 || n == 0 || width == 0 {
        return invalid(format!("empty factorization {m}x{n} with width {width}"));
    }
    let shape = |l: usize| match l {
        0 => (width, n),
        l if l == depth - 1 => (m, width),
        _ => (width, width),
    };
    let factors = match scheme {
        InitScheme::Gaussian { variance } => (0..depth)
            .map(|l| {
                let (r, c) = shape(l);
                gaussian_matrix(rng, r, c, 0.0, variance)
            })
            .collect::<Result<Vec<_>>>()?,
        InitScheme::BalancedIdentity { alpha } => {
            if m != n || width != m {
                return invalid(format!(
                    "identity initialization needs m = n = width, got {m}x{n} width {width}"
                ));
            }
            vec![Matrix::identity(m).scale(alpha); depth]
        }
        InitScheme::BalancedSpectral { scale } => {
            let seed = gaussian_matrix(rng, m, n, 0.0, scale * scale)?;
            balanced_from(&seed, depth, width, rng)?
        }
    };
    FactorChain::new(factors)
}

fn balanced_from(
    seed: &Matrix,
    depth: usize,
    width: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Matrix>> {
    let (m, n) = seed.shape();
    let d = svd(seed)?;
    let k = d.s.len();
    // Root singular values, padded with zeros (or truncated) to the width.
    let root: Vec<f64> = (0..width)
        .map(|i| {
            if i < k {
                d.s[i].powf(1.0 / depth as f64)
            } else {
                0.0
            }
        })
        .collect();
    let pad = |basis: &Matrix, rows: usize| {
        Matrix::from_fn(rows, width, |i, j| {
            if j < k {
                basis[(i, j)] * root[j]
            } else {
                0.0
            }
        })
    };
    let q: Vec<Matrix> = (0..depth).map(|_| random_orthogonal(rng, width)).collect();
    let s = Matrix::diag(&root);
    let mut factors = Vec::with_capacity(depth);
    factors.push(q[1].matmul_t(&pad(&d.v, n)));
    for l in 1..depth - 1 {
        factors.push(q[l + 1].matmul(&s).matmul_t(&q[l]));
    }
    factors.push(pad(&d.u, m).matmul_t(&q[depth - 1]));
    Ok(factors)
}

/// `X − Y` at observed positions, zero elsewhere.
pub fn residual(x: &Matrix, mask: &SamplingMask, y_obs: &[f64]) -> Result<Matrix> {
    mask.check_shape(x)?;
    if y_obs.len() != mask.observed_count() {
        return invalid(format!(
            "{} observations for a mask with {} observed entries",
            y_obs.len(),
            mask.observed_count()
        ));
    }
    let mut r = lift_observed(y_obs, mask)?;
    for ((r, &x), &obs) in r
        .as_mut_slice()
        .iter_mut()
        .zip(x.as_slice())
        .zip(mask.as_slice())
    {
        if obs {
            *r = x - *r;
        }
    }
    Ok(r)
}

/// `½ Σ_observed (X_ij − Y_ij)²`.
pub fn fidelity_loss(chain: &FactorChain, mask: &SamplingMask, y_obs: &[f64]) -> Result<f64> {
    let r = residual(&chain.forward(), mask, y_obs)?;
    Ok(0.5 * r.inner(&r))
}

pub fn fidelity_grad(
    chain: &FactorChain,
    mask: &SamplingMask,
    y_obs: &[f64],
) -> Result<Vec<Matrix>> {
    let r = residual(&chain.forward(), mask, y_obs)?;
    Ok(chain.chain_grad(&r))
}
