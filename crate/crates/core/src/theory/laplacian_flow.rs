use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::reg::{
    build_laplacian, decay_constant, dirichlet_energy, grad_wrt_w, limit_laplacian, pair_sets,
    Decay, LaplacianPair, LimitLaplacian, Parameterization, RegParam,
};

use super::{Check, FlowReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplacianFlowParams {
    pub lr: f64,
    pub steps: usize,
    /// Initial parameter `W(0) = eps_init · 1`.
    pub eps_init: f64,
    pub checkpoint_every: usize,
}

impl Default for LaplacianFlowParams {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            steps: 200_000,
            eps_init: 0.1,
            checkpoint_every: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LaplacianFlow {
    /// Columns `t, energy, bound, s1_gap, s2_gap, asymmetry`.
    pub report: FlowReport,
    pub final_w: Matrix,
    pub final_pair: LaplacianPair,
    pub limit: LimitLaplacian,
    pub decay: Decay,
    /// `−d ln R / dt` from a least-squares fit over the checkpoints.
    pub fitted_rate: f64,
    /// Largest `‖W − Wᵀ‖_F` seen at any step.
    pub max_asymmetry: f64,
}

struct Gaps {
    s1: f64,
    s2: f64,
}

fn gaps(
    pair: &LaplacianPair,
    distinct: &[(usize, usize)],
    identical: &[(usize, usize)],
    gamma: f64,
) -> Gaps {
    Gaps {
        s1: distinct
            .iter()
            .map(|&(k, l)| pair.l[(k, l)].abs())
            .fold(0.0, f64::max),
        s2: identical
            .iter()
            .map(|&(k, l)| (pair.a[(k, l)] - gamma).abs())
            .fold(0.0, f64::max),
    }
}

/// Least-squares slope of `ln y` against `t`, negated.
fn fitted_decay(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    -cov / var
}

/// Gradient descent on the regularizer parameter alone, `X` fixed, with the
/// sum-form adjacency and a constant start. Checks symmetry of `W`, the
/// limiting Laplacian, the relative speed of identical and distinct pairs,
/// the decay rate and the vanishing-energy bound.
pub fn verify_theorem2(m: &Matrix, params: &LaplacianFlowParams) -> Result<LaplacianFlow> {
    if !(params.lr > 0.0) || params.checkpoint_every == 0 {
        return invalid("learning rate and checkpoint interval must be positive");
    }
    let limit = limit_laplacian(m)?;
    let decay = decay_constant(m)?;
    let sets = pair_sets(m);
    let gamma = limit.gamma;
    let dim = m.rows() as f64;
    let bound_at = |t: f64| 2.0 * dim * (dim - 1.0) * (-decay.d * t).exp() / gamma;

    let mut p = RegParam::constant(m.rows(), params.eps_init, Parameterization::Sum)?;
    let mut report = FlowReport::new(&["t", "energy", "bound", "s1_gap", "s2_gap", "asymmetry"]);
    let mut max_asymmetry = 0.0f64;
    let mut min_energy = f64::INFINITY;
    let mut bound_ok = true;
    let mut order_ok = true;
    let mut fit = Vec::new();

    for step in 0..=params.steps {
        let asym = p.w.sub(&p.w.transpose()).frobenius_norm();
        max_asymmetry = max_asymmetry.max(asym);
        if step % params.checkpoint_every == 0 || step == params.steps {
            let pair = build_laplacian(&p)?;
            let energy = dirichlet_energy(&pair.l, m)?;
            let t = step as f64 * params.lr;
            let g = gaps(&pair, &sets.distinct, &sets.identical, gamma);
            let bound = bound_at(t);
            min_energy = min_energy.min(energy);
            bound_ok &= energy <= bound;
            if step > 0 && !sets.distinct.is_empty() && !sets.identical.is_empty() {
                order_ok &= g.s2 <= g.s1;
            }
            fit.push((t, energy));
            report.rows.push(vec![t, energy, bound, g.s1, g.s2, asym]);
        }
        if step == params.steps {
            break;
        }
        let g = grad_wrt_w(&p, m)?;
        p.w.axpy(-params.lr, &g);
        if !p.w.is_finite() {
            return Err(Error::Divergence {
                iter: step + 1,
                message: "regularizer parameter became non-finite".into(),
            });
        }
    }

    let final_pair = build_laplacian(&p)?;
    let last = gaps(&final_pair, &sets.distinct, &sets.identical, gamma);
    let fitted_rate = fitted_decay(&fit);
    let checks = &mut report.checks;
    checks.push(Check::new(
        "symmetry",
        max_asymmetry < 1e-10,
        format!("max ‖W − Wᵀ‖ = {max_asymmetry:.3e}"),
    ));
    if decay.degenerate {
        let top = fit.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "energy identically zero",
            top < 1e-12,
            format!("max |R| = {top:.3e}"),
        ));
    } else {
        checks.push(Check::new(
            "distinct pairs vanish",
            last.s1 < 1e-3 * gamma,
            format!(
                "max |L_kl| over distinct pairs = {:.3e} (limit {:.3e})",
                last.s1,
                1e-3 * gamma
            ),
        ));
        if !sets.identical.is_empty() {
            checks.push(Check::new(
                "identical pairs reach gamma",
                last.s2 < 1e-3,
                format!(
                    "max |A_kl − {gamma}| over identical pairs = {:.3e}",
                    last.s2
                ),
            ));
            checks.push(Check::new(
                "identical pairs converge first",
                order_ok,
                "identical-pair gap <= distinct-pair gap at every checkpoint",
            ));
        }
        checks.push(Check::new(
            "decay rate",
            fitted_rate >= decay.d / 2.0,
            format!("fitted rate {fitted_rate:.4e}, D = {:.4e}", decay.d),
        ));
        checks.push(Check::new(
            "energy bound",
            bound_ok && min_energy >= -1e-12,
            format!("R(t) <= 2m(m−1)exp(−Dt)/γ at every checkpoint: {bound_ok}; min R = {min_energy:.3e}"),
        ));
    }
    Ok(LaplacianFlow {
        report,
        final_w: p.w,
        final_pair,
        limit,
        decay,
        fitted_rate,
        max_asymmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_keep_zero_energy() {
        let m = Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8]]);
        let params = LaplacianFlowParams {
            steps: 200,
            checkpoint_every: 20,
            ..Default::default()
        };
        let flow = verify_theorem2(&m, &params).unwrap();
        assert!(flow.report.passed(), "{:?}", flow.report.checks);
        assert!(flow.decay.degenerate);
        assert_eq!(flow.report.rows.len(), 11);
    }

    #[test]
    fn short_run_symmetry_and_monotone_energy() {
        let m = Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8], [0.8, 0.6]]);
        let params = LaplacianFlowParams {
            steps: 2000,
            checkpoint_every: 100,
            ..Default::default()
        };
        let flow = verify_theorem2(&m, &params).unwrap();
        assert_eq!(flow.max_asymmetry, 0.0);
        let energies: Vec<f64> = flow.report.rows.iter().map(|r| r[1]).collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn exponential_fit() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| (i as f64, 3.0 * (-0.25 * i as f64).exp()))
            .collect();
        assert!((fitted_decay(&pts) - 0.25).abs() < 1e-12);
    }
}
