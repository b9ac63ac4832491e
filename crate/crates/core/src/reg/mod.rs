//! Learned graph-Laplacian regularizer.
//!
//! A trainable square matrix `W` defines a strictly positive symmetric
//! adjacency `A` and Laplacian `L = diag(A·1) − A`. The penalty on a matrix
//! `M` is the Dirichlet energy `tr(Mᵀ L M) = ½ Σ_kl A_kl ‖M_k − M_l‖²`.

mod limit;
mod transform;

pub use limit::{
    decay_constant, limit_laplacian, normalize_rows_positive, pair_sets, Decay, LimitLaplacian,
    PairSets,
};
pub use transform::{apply_transform, invert_transform, Transform};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, SeededRng};

/// Largest `W` entry accepted before `exp` is considered to overflow.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parameterization {
    /// `A = exp(W + Wᵀ) / S` elementwise, `S = Σ exp(W)`.
    #[default]
    Product,
    /// `A = A′ + A′ᵀ` with `A′ = exp(Wᵀ) / S`.
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegParam {
    pub w: Matrix,
    pub form: Parameterization,
}

impl RegParam {
    pub fn new(w: Matrix, form: Parameterization) -> Result<Self> {
        if !w.is_square() || w.rows() == 0 {
            return invalid(format!(
                "regularizer parameter must be square, got {:?}",
                w.shape()
            ));
        }
        if !w.is_finite() {
            return invalid("regularizer parameter contains non-finite entries");
        }
        Ok(Self { w, form })
    }

    /// `W = eps · 1`, the symmetric start used by the convergence analysis.
    pub fn constant(dim: usize, eps: f64, form: Parameterization) -> Result<Self> {
        Self::new(Matrix::filled(dim, dim, eps), form)
    }

    pub fn gaussian(
        rng: &mut SeededRng,
        dim: usize,
        variance: f64,
        form: Parameterization,
    ) -> Result<Self> {
        Self::new(gaussian_matrix(rng, dim, dim, 0.0, variance)?, form)
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianPair {
    pub a: Matrix,
    /// `A′ = exp(Wᵀ) / S`.
    pub a_prime: Matrix,
    pub l: Matrix,
}

/// `diag(A·1) − A`.
pub fn laplacian_of(a: &Matrix) -> Matrix {
    let degrees = a.row_sums();
    let mut l = a.scale(-1.0);
    for (i, d) in degrees.into_iter().enumerate() {
        l[(i, i)] += d;
    }
    l
}

pub fn build_laplacian(p: &RegParam) -> Result<LaplacianPair> {
    let w = &p.w;
    let top = w.max();
    if !(top <= EXP_LIMIT) {
        return Err(Error::NumericOverflow(format!(
            "regularizer parameter entry {top} exceeds {EXP_LIMIT}"
        )));
    }
    // Shifting by the largest entry keeps every exponential finite; the shift
    // cancels in each ratio below.
    let shifted = w.map(|x| x - top);
    let e = shifted.exp();
    let s = e.sum();
    let a_prime = e.transpose().scale(1.0 / s);
    let a = match p.form {
        Parameterization::Product => Matrix::from_fn(w.rows(), w.cols(), |k, l| {
            (w[(k, l)] + w[(l, k)] - top).exp() / s
        }),
        Parameterization::Sum => a_prime.add(&a_prime.transpose()),
    };
    if !a.is_finite() {
        return Err(Error::NumericOverflow("adjacency is not finite".into()));
    }
    let l = laplacian_of(&a);
    Ok(LaplacianPair { a, a_prime, l })
}

fn check_rows(l_dim: usize, m: &Matrix) -> Result<()> {
    if m.rows() != l_dim {
        return invalid(format!(
            "matrix has {} rows but the Laplacian is {l_dim}x{l_dim}",
            m.rows()
        ));
    }
    Ok(())
}

/// `tr(Mᵀ L M)`.
pub fn dirichlet_energy(l: &Matrix, m: &Matrix) -> Result<f64> {
    if !l.is_square() {
        return invalid(format!("Laplacian must be square, got {:?}", l.shape()));
    }
    check_rows(l.rows(), m)?;
    Ok(l.inner(&m.matmul_t(m)))
}

/// `C = diag(G)·1ᵀ − G` with `G = M Mᵀ`, i.e. `C_kl = ‖M_k‖² − ⟨M_k, M_l⟩`.
pub fn gram_c(m: &Matrix) -> Matrix {
    let g = m.matmul_t(m);
    Matrix::from_fn(g.rows(), g.cols(), |k, l| g[(k, k)] - g[(k, l)])
}

/// Gradient of `tr(Mᵀ L(W) M)` with respect to `W`.
///
/// With `D = C + Cᵀ` (squared row distances), `E = exp(W)/S` and
/// `R = Σ A ⊙ C` the energy:
/// product form `D ⊙ A − R·E`, sum form `(D − R) ⊙ E`.
pub fn grad_wrt_w(p: &RegParam, m: &Matrix) -> Result<Matrix> {
    check_rows(p.dim(), m)?;
    let pair = build_laplacian(p)?;
    Ok(grad_from_pair(p.form, &pair, m))
}

pub(crate) fn grad_from_pair(form: Parameterization, pair: &LaplacianPair, m: &Matrix) -> Matrix {
    let c = gram_c(m);
    let d = c.add(&c.transpose());
    let r = pair.a.inner(&c);
    let e = pair.a_prime.transpose();
    match form {
        Parameterization::Product => d.hadamard(&pair.a).sub(&e.scale(r)),
        Parameterization::Sum => d.map(|x| x - r).hadamard(&e),
    }
}

/// `2 λr Lr X + 2 λc X Lc`, the gradient of `λr tr(XᵀLrX) + λc tr(X Lc Xᵀ)`.
pub fn grad_wrt_x(
    lr: &Matrix,
    lc: &Matrix,
    x: &Matrix,
    lambda_r: f64,
    lambda_c: f64,
) -> Result<Matrix> {
    let (m, n) = x.shape();
    if lr.shape() != (m, m) || lc.shape() != (n, n) {
        return invalid(format!(
            "Laplacians {:?} and {:?} do not fit a {m}x{n} matrix",
            lr.shape(),
            lc.shape()
        ));
    }
    let mut g = Matrix::zeros(m, n);
    if lambda_r != 0.0 {
        g.axpy(2.0 * lambda_r, &lr.matmul(x));
    }
    if lambda_c != 0.0 {
        g.axpy(2.0 * lambda_c, &x.matmul(lc));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn uniform_product_form() {
        let pair = build_laplacian(&RegParam::constant(2, 0.0, Parameterization::Product).unwrap())
            .unwrap();
        assert!(close(&pair.a, &Matrix::filled(2, 2, 0.25), 1e-15));
        assert!(close(
            &pair.l,
            &Matrix::from_rows(&[[0.25, -0.25], [-0.25, 0.25]]),
            1e-15
        ));
    }

    #[test]
    fn uniform_sum_form() {
        let pair =
            build_laplacian(&RegParam::constant(2, 0.0, Parameterization::Sum).unwrap()).unwrap();
        assert!(close(&pair.a_prime, &Matrix::filled(2, 2, 0.25), 1e-15));
        assert!(close(&pair.a, &Matrix::filled(2, 2, 0.5), 1e-15));
        assert!(close(
            &pair.l,
            &Matrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]),
            1e-15
        ));
    }

    #[test]
    fn product_form_by_hand() {
        let w = Matrix::from_rows(&[[0.0, 2f64.ln()], [0.0, 0.0]]);
        let pair = build_laplacian(&RegParam::new(w, Parameterization::Product).unwrap()).unwrap();
        // S = 1 + 2 + 1 + 1 = 5.
        assert!(close(
            &pair.a,
            &Matrix::from_rows(&[[0.2, 0.4], [0.4, 0.2]]),
            1e-15
        ));
        assert!(close(
            &pair.l,
            &Matrix::from_rows(&[[0.4, -0.4], [-0.4, 0.4]]),
            1e-15
        ));
        assert!(close(
            &pair.a_prime,
            &Matrix::from_rows(&[[0.2, 0.2], [0.4, 0.2]]),
            1e-15
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let w = Matrix::from_rows(&[[0.0, 701.0], [0.0, 0.0]]);
        let err = build_laplacian(&RegParam::new(w, Parameterization::Sum).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow(_)));
        let w = Matrix::from_rows(&[[0.0, 690.0], [0.0, 0.0]]);
        assert!(build_laplacian(&RegParam::new(w, Parameterization::Product).unwrap()).is_ok());
    }

    #[test]
    fn rejects_non_square() {
        assert!(RegParam::new(Matrix::zeros(2, 3), Parameterization::Sum).is_err());
    }

    #[test]
    fn energy_of_identical_rows_vanishes() {
        let mut rng = SeededRng::new(5);
        let p = RegParam::gaussian(&mut rng, 4, 1.0, Parameterization::Product).unwrap();
        let l = build_laplacian(&p).unwrap().l;
        let m = Matrix::from_fn(4, 3, |_, j| j as f64 + 0.5);
        assert!(dirichlet_energy(&l, &m).unwrap().abs() < 1e-14);
        assert!(dirichlet_energy(&l, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn energy_by_hand() {
        let l = build_laplacian(&RegParam::constant(2, 0.0, Parameterization::Product).unwrap())
            .unwrap()
            .l;
        assert!((dirichlet_energy(&l, &Matrix::identity(2)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sum_form_gradient_by_hand() {
        let p = RegParam::constant(2, 0.0, Parameterization::Sum).unwrap();
        let g = grad_wrt_w(&p, &Matrix::identity(2)).unwrap();
        assert!(close(
            &g,
            &Matrix::from_rows(&[[-0.25, 0.25], [0.25, -0.25]]),
            1e-15
        ));
    }

    #[test]
    fn x_gradient_cases() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 5.0]]);
        let lr = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(grad_wrt_x(&lr, &lr, &x, 0.0, 0.0).unwrap(), zero);
        assert_eq!(
            grad_wrt_x(&lr, &zero, &x, 1.0, 0.7).unwrap(),
            lr.matmul(&x).scale(2.0)
        );
        assert!(grad_wrt_x(&lr, &Matrix::zeros(3, 3), &x, 1.0, 1.0).is_err());
    }

    fn form_strategy() -> impl Strategy<Value = Parameterization> {
        prop_oneof![Just(Parameterization::Product), Just(Parameterization::Sum)]
    }

    proptest! {
        #[test]
        fn laplacian_structure(seed in any::<u64>(), dim in 1usize..8, form in form_strategy()) {
            let mut rng = SeededRng::new(seed);
            let p = RegParam::gaussian(&mut rng, dim, 4.0, form).unwrap();
            let pair = build_laplacian(&p).unwrap();
            prop_assert!(pair.a.min() > 0.0);
            prop_assert_eq!(pair.a.max_abs_diff(&pair.a.transpose()), 0.0);
            let scale = pair.a.max_abs().max(1.0);
            for s in pair.l.row_sums() {
                prop_assert!(s.abs() <= 1e-12 * scale);
            }
            for k in 0..dim {
                for l in 0..dim {
                    if k != l {
                        prop_assert!(pair.l[(k, l)] <= 0.0);
                    }
                }
            }
            let x = gaussian_matrix(&mut rng, dim, 1, 0.0, 1.0).unwrap();
            prop_assert!(dirichlet_energy(&pair.l, &x).unwrap() >= -1e-12);
        }

        #[test]
        fn trace_equals_pairwise(seed in any::<u64>(), dim in 1usize..7, cols in 1usize..5) {
            let mut rng = SeededRng::new(seed);
            let p = RegParam::gaussian(&mut rng, dim, 1.0, Parameterization::Product).unwrap();
            let pair = build_laplacian(&p).unwrap();
            let m = gaussian_matrix(&mut rng, dim, cols, 0.0, 1.0).unwrap();
            let trace = dirichlet_energy(&pair.l, &m).unwrap();
            let mut pairwise = 0.0;
            for k in 0..dim {
                for l in 0..dim {
                    let d: f64 = m.row(k).iter().zip(m.row(l)).map(|(a, b)| (a - b) * (a - b)).sum();
                    pairwise += 0.5 * pair.a[(k, l)] * d;
                }
            }
            prop_assert!((trace - pairwise).abs() <= 1e-10 * pairwise.abs().max(1e-300));
        }
    }
}
