use crate::baselines::tv_value_and_grad;
use crate::data::{generate_mask, MaskKind};
use crate::dmf::{fidelity_grad, fidelity_loss, initialize, FactorChain, InitScheme};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::reg::{
    build_laplacian, dirichlet_energy, grad_wrt_w, grad_wrt_x, Parameterization, RegParam,
};
use crate::rng::{gaussian_matrix, SeededRng};

use super::{Check, FlowReport};

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut probe = x.clone();
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.as_slice().len() {
        let x0 = x.as_slice()[k];
        probe.as_mut_slice()[k] = x0 + h;
        let up = f(&probe);
        probe.as_mut_slice()[k] = x0 - h;
        let down = f(&probe);
        probe.as_mut_slice()[k] = x0;
        g.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    g
}

/// `max |a − b| / max |b|`, with the denominator floored at `1e-12`.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-12)
}

const H: f64 = 1e-5;

/// Finite-difference checks of every analytic gradient in the crate.
pub fn gradcheck_suite(seed: u64, tol: f64) -> Result<FlowReport> {
    let mut rng = SeededRng::new(seed);
    let mut report = FlowReport::new(&["case", "relative_error"]);
    let mut case = 0.0;
    let mut push = |report: &mut FlowReport, name: String, err: f64| {
        report.rows.push(vec![case, err]);
        case += 1.0;
        report.checks.push(Check::new(
            name,
            err < tol,
            format!("relative error {err:.3e}"),
        ));
    };

    for (i, &dim) in [4usize, 6, 8].iter().enumerate() {
        for form in [Parameterization::Product, Parameterization::Sum] {
            let p = RegParam::gaussian(&mut rng, dim, 1.0, form)?;
            let m = gaussian_matrix(&mut rng, dim, 3 + i, 0.0, 1.0)?;
            let analytic = grad_wrt_w(&p, &m)?;
            let numeric = central_difference(&p.w, H, |w| {
                let q = RegParam { w: w.clone(), form };
                dirichlet_energy(&build_laplacian(&q).expect("finite").l, &m).expect("shapes")
            });
            push(
                &mut report,
                format!("grad_wrt_w {form:?} m={dim}"),
                relative_error(&analytic, &numeric),
            );
        }
    }

    let (m, n) = (4, 5);
    let chain = initialize(m, n, 3, 4, InitScheme::Gaussian { variance: 0.5 }, &mut rng)?;
    let mask = generate_mask(&mut rng, m, n, &MaskKind::Random { p: 0.3 })?;
    let y: Vec<f64> = (0..mask.observed_count())
        .map(|_| rng.standard_normal())
        .collect();
    let grads = fidelity_grad(&chain, &mask, &y)?;
    for (l, g) in grads.iter().enumerate() {
        let numeric = central_difference(&chain.factors()[l], H, |w| {
            let mut f = chain.factors().to_vec();
            f[l] = w.clone();
            fidelity_loss(&FactorChain::new(f).expect("shapes"), &mask, &y).expect("shapes")
        });
        push(
            &mut report,
            format!("fidelity_grad factor {l}"),
            relative_error(g, &numeric),
        );
    }

    let x = gaussian_matrix(&mut rng, m, n, 0.0, 1.0)?;
    let lr = build_laplacian(&RegParam::gaussian(
        &mut rng,
        m,
        1.0,
        Parameterization::Product,
    )?)?
    .l;
    let lc = build_laplacian(&RegParam::gaussian(
        &mut rng,
        n,
        1.0,
        Parameterization::Product,
    )?)?
    .l;
    let (lam_r, lam_c) = (0.7, 1.3);
    let analytic = grad_wrt_x(&lr, &lc, &x, lam_r, lam_c)?;
    let numeric = central_difference(&x, H, |x| {
        lam_r * dirichlet_energy(&lr, x).expect("shapes")
            + lam_c * dirichlet_energy(&lc, &x.transpose()).expect("shapes")
    });
    push(
        &mut report,
        "grad_wrt_x".into(),
        relative_error(&analytic, &numeric),
    );

    let x = gaussian_matrix(&mut rng, 6, 6, 0.0, 1.0)?;
    let eps = 1e-2;
    let (_, analytic) = tv_value_and_grad(&x, eps);
    let numeric = central_difference(&x, H, |x| tv_value_and_grad(x, eps).0);
    push(
        &mut report,
        "tv gradient".into(),
        relative_error(&analytic, &numeric),
    );

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = gradcheck_suite(1, 1e-5).unwrap();
        assert!(
            report.passed(),
            "{:#?}",
            report.failed().collect::<Vec<_>>()
        );
        assert_eq!(report.checks.len(), 6 + 3 + 2);
    }

    #[test]
    fn difference_of_quadratic() {
        let x = Matrix::from_rows(&[[1.0, -2.0]]);
        let g = central_difference(&x, 1e-4, |x| x.inner(x));
        assert!(g.max_abs_diff(&x.scale(2.0)) < 1e-9);
    }
}
