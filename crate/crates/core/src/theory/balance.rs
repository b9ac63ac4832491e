use crate::data::{generate_mask, MaskKind};
use crate::dmf::{fidelity_grad, initialize, InitScheme};
use crate::error::Result;
use crate::rng::{gaussian_matrix, SeededRng};
use crate::train::observations;

use super::{Check, FlowReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceParams {
    pub m: usize,
    pub n: usize,
    pub depth: usize,
    pub lr: f64,
    pub steps: usize,
    pub init: InitScheme,
    pub checkpoint_every: usize,
    /// Largest accepted residual relative to the squared factor scale.
    pub tol: f64,
}

impl Default for BalanceParams {
    fn default() -> Self {
        Self {
            m: 5,
            n: 4,
            depth: 3,
            lr: 1e-4,
            steps: 1000,
            init: InitScheme::BalancedSpectral { scale: 1.0 },
            checkpoint_every: 100,
            tol: 1e-3,
        }
    }
}

/// Plain gradient descent on the fidelity term from a balanced start,
/// tracking `‖W⁽ˡ⁺¹⁾ᵀW⁽ˡ⁺¹⁾ − W⁽ˡ⁾W⁽ˡ⁾ᵀ‖_F / max_l ‖W⁽ˡ⁾‖_F²` per layer pair.
pub fn verify_balance(params: &BalanceParams, rng: &mut SeededRng) -> Result<FlowReport> {
    let BalanceParams { m, n, depth, .. } = *params;
    let mut chain = initialize(m, n, depth, m.min(n), params.init, rng)?;
    let target = gaussian_matrix(rng, m, n, 0.0, 1.0)?;
    let mask = generate_mask(rng, m, n, &MaskKind::Random { p: 0.3 })?;
    let y = observations(&target, &mask)?;

    let mut columns = vec!["t".to_string()];
    columns.extend((0..depth - 1).map(|l| format!("residual_{l}")));
    let mut report = FlowReport {
        columns,
        ..FlowReport::default()
    };
    let mut worst = 0.0f64;
    let mut initial = 0.0f64;
    for step in 0..=params.steps {
        if step % params.checkpoint_every.max(1) == 0 || step == params.steps {
            let scale = chain
                .factors()
                .iter()
                .map(|w| w.frobenius_norm().powi(2))
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let rel: Vec<f64> = chain
                .balance_residuals()
                .into_iter()
                .map(|r| r / scale)
                .collect();
            let top = rel.iter().copied().fold(0.0, f64::max);
            if step == 0 {
                initial = top;
            }
            worst = worst.max(top);
            let mut row = vec![step as f64 * params.lr];
            row.extend(rel);
            report.rows.push(row);
        }
        if step == params.steps {
            break;
        }
        let grads = fidelity_grad(&chain, &mask, &y)?;
        for (w, g) in chain.factors_mut().iter_mut().zip(&grads) {
            w.axpy(-params.lr, g);
        }
    }
    report.checks.push(Check::new(
        "balanced at start",
        initial < 1e-10,
        format!("relative residual {initial:.3e}"),
    ));
    report.checks.push(Check::new(
        "balance conserved",
        worst < params.tol,
        format!(
            "max relative residual {worst:.3e} (limit {:.1e})",
            params.tol
        ),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps() {
        let params = BalanceParams {
            steps: 0,
            ..Default::default()
        };
        let report = verify_balance(&params, &mut SeededRng::new(1)).unwrap();
        assert!(report.passed());
        assert_eq!(report.rows.len(), 1);
    }

    #[test]
    fn identity_start_is_exact() {
        let params = BalanceParams {
            m: 4,
            n: 4,
            steps: 0,
            init: InitScheme::BalancedIdentity { alpha: 0.5 },
            ..Default::default()
        };
        let report = verify_balance(&params, &mut SeededRng::new(1)).unwrap();
        assert_eq!(report.rows[0][1..], [0.0, 0.0]);
    }

    #[test]
    fn drift_stays_small() {
        let report = verify_balance(&BalanceParams::default(), &mut SeededRng::new(2)).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
    }
}
