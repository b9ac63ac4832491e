//! Library results checked against independently computed references.

use air_core::data::{
    apply_mask, gen_lowrank, generate_mask, lift_observed, read_mask_pgm, write_mask_pgm,
};
use air_core::dmf::{fidelity_grad, initialize};
use air_core::rng::gaussian_matrix;
use air_core::{svd, FactorChain, InitScheme, MaskKind, Matrix, SeededRng, Which};
use proptest::prelude::*;

/// Eigenvalues of a symmetric 3×3 matrix by the trigonometric cubic
/// solution, in descending order.
fn sym3_eigenvalues(b: &Matrix) -> [f64; 3] {
    let p1 = b[(0, 1)].powi(2) + b[(0, 2)].powi(2) + b[(1, 2)].powi(2);
    let q = b.trace() / 3.0;
    let p2 = (b[(0, 0)] - q).powi(2) + (b[(1, 1)] - q).powi(2) + (b[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let c = Matrix::from_fn(3, 3, |i, j| (b[(i, j)] - if i == j { q } else { 0.0 }) / p);
    let det = c[(0, 0)] * (c[(1, 1)] * c[(2, 2)] - c[(1, 2)] * c[(2, 1)])
        - c[(0, 1)] * (c[(1, 0)] * c[(2, 2)] - c[(1, 2)] * c[(2, 0)])
        + c[(0, 2)] * (c[(1, 0)] * c[(2, 1)] - c[(1, 1)] * c[(2, 0)]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

#[test]
fn singular_values_match_cubic_eigenvalues() {
    let mut rng = SeededRng::new(42);
    let x = gaussian_matrix(&mut rng, 5, 3, 0.0, 1.0).unwrap();
    let d = svd(&x).unwrap();
    let eig = sym3_eigenvalues(&x.t_matmul(&x));
    for (s, e) in d.s.iter().zip(eig) {
        assert!(
            (s - e.sqrt()).abs() < 1e-12 * eig[0].sqrt(),
            "{s} vs {}",
            e.sqrt()
        );
    }
    assert!(d.reconstruct().max_abs_diff(&x) < 1e-12);
}

#[test]
fn forward_is_associative_product() {
    let mut rng = SeededRng::new(3);
    for depth in 2..6 {
        let chain = initialize(
            6,
            4,
            depth,
            5,
            InitScheme::Gaussian { variance: 0.5 },
            &mut rng,
        )
        .unwrap();
        let f = chain.factors();
        // Right-to-left grouping: W(L-1) · (W(L-2) · (... · W(0))).
        let mut right = f[0].clone();
        for w in &f[1..] {
            right = w.matmul(&right);
        }
        // Left-to-right grouping from the outermost factor.
        let mut left = f[depth - 1].clone();
        for w in f[..depth - 1].iter().rev() {
            left = left.matmul(w);
        }
        let x = chain.forward();
        assert_eq!(x.shape(), (6, 4));
        assert!(x.max_abs_diff(&right) < 1e-12);
        assert!(x.max_abs_diff(&left) < 1e-12);
    }
}

fn fidelity(factors: &[Matrix], mask: &air_core::SamplingMask, y: &Matrix) -> f64 {
    let mut x = factors[0].clone();
    for w in &factors[1..] {
        x = w.matmul(&x);
    }
    let mut s = 0.0;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if mask.is_observed(i, j) {
                s += 0.5 * (x[(i, j)] - y[(i, j)]).powi(2);
            }
        }
    }
    s
}

#[test]
fn fidelity_gradient_matches_finite_differences() {
    let h = 1e-6;
    let mut rng = SeededRng::new(20);
    for k in 0..20 {
        let (m, n, depth, width) = (3 + k % 4, 2 + k % 3, 2 + k % 3, 2 + k % 4);
        let y = gaussian_matrix(&mut rng, m, n, 0.0, 1.0).unwrap();
        let mask = generate_mask(&mut rng, m, n, &MaskKind::Random { p: 0.4 }).unwrap();
        let y_obs = apply_mask(&y, &mask, Which::Observed).unwrap();
        let chain = initialize(
            m,
            n,
            depth,
            width,
            InitScheme::Gaussian { variance: 1.0 },
            &mut rng,
        )
        .unwrap();
        let grads = fidelity_grad(&chain, &mask, &y_obs).unwrap();
        let base: Vec<Matrix> = chain.factors().to_vec();
        for (l, g) in grads.iter().enumerate() {
            let mut worst: f64 = 0.0;
            for idx in 0..g.as_slice().len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[l].as_mut_slice()[idx] += h;
                minus[l].as_mut_slice()[idx] -= h;
                let fd = (fidelity(&plus, &mask, &y) - fidelity(&minus, &mask, &y)) / (2.0 * h);
                worst = worst.max((fd - g.as_slice()[idx]).abs());
            }
            assert!(
                worst < 1e-6 * g.max_abs().max(1.0),
                "instance {k} factor {l}: {worst:e}"
            );
        }
    }
}

#[test]
fn mask_survives_pgm_round_trip() {
    let mut rng = SeededRng::new(8);
    let mask = generate_mask(
        &mut rng,
        13,
        9,
        &MaskKind::Texture {
            period: 4,
            thickness: 1,
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.pgm");
    write_mask_pgm(&mask, &path).unwrap();
    assert_eq!(read_mask_pgm(&path).unwrap(), mask);
}

#[test]
fn lifting_inverts_sampling_on_observed_entries() {
    let mut rng = SeededRng::new(9);
    let truth = gen_lowrank(&mut rng, 8, 7, 2).unwrap();
    let mask = generate_mask(&mut rng, 8, 7, &MaskKind::Random { p: 0.5 }).unwrap();
    let obs = apply_mask(&truth.full, &mask, Which::Observed).unwrap();
    let lifted = lift_observed(&obs, &mask).unwrap();
    for i in 0..8 {
        for j in 0..7 {
            let expected = if mask.is_observed(i, j) {
                truth.full[(i, j)]
            } else {
                0.0
            };
            assert_eq!(lifted[(i, j)], expected);
        }
    }
}

proptest! {
    #[test]
    fn svd_factors_are_orthonormal(seed in 0u64..500, m in 1usize..8, n in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let x = gaussian_matrix(&mut rng, m, n, 0.0, 1.0).unwrap();
        let d = svd(&x).unwrap();
        let k = m.min(n);
        prop_assert!(d.reconstruct().max_abs_diff(&x) < 1e-10);
        prop_assert!(d.u.t_matmul(&d.u).max_abs_diff(&Matrix::identity(k)) < 1e-10);
        prop_assert!(d.v.t_matmul(&d.v).max_abs_diff(&Matrix::identity(k)) < 1e-10);
        prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]) && d.s.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn chain_gradient_is_linear_in_g(seed in 0u64..200, a in -2.0f64..2.0) {
        let mut rng = SeededRng::new(seed);
        let chain: FactorChain = initialize(4, 3, 3, 3, InitScheme::Gaussian { variance: 1.0 }, &mut rng).unwrap();
        let g1 = gaussian_matrix(&mut rng, 4, 3, 0.0, 1.0).unwrap();
        let g2 = gaussian_matrix(&mut rng, 4, 3, 0.0, 1.0).unwrap();
        let lhs = chain.chain_grad(&g1.add(&g2.scale(a)));
        let r1 = chain.chain_grad(&g1);
        let r2 = chain.chain_grad(&g2);
        for ((l, x), y) in lhs.iter().zip(&r1).zip(&r2) {
            prop_assert!(l.max_abs_diff(&x.add(&y.scale(a))) < 1e-10);
        }
    }
}
