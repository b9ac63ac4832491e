use crate::data::{GroundTruth, SamplingMask};
use crate::dmf::FactorChain;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::reg::{laplacian_of, Parameterization, RegParam};
use crate::train::{train_with, ModelState, Penalty, TrainConfig, TrainOutcome};

use super::TvConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplacianSource {
    /// Snapshot of an adaptive run after `iter` updates.
    FrozenAt {
        iter: usize,
    },
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedLaplacians {
    pub lr: Matrix,
    pub lc: Matrix,
    pub source: LaplacianSource,
}

fn check_laplacian(name: &str, l: &Matrix) -> Result<()> {
    if !l.is_square() || !l.is_finite() {
        return invalid(format!(
            "{name} must be a finite square matrix, got {:?}",
            l.shape()
        ));
    }
    let scale = l.max_abs().max(1.0);
    if l.max_abs_diff(&l.transpose()) > 1e-12 * scale {
        return invalid(format!("{name} is not symmetric"));
    }
    if let Some((k, s)) = l
        .row_sums()
        .into_iter()
        .enumerate()
        .find(|(_, s)| s.abs() > 1e-10 * scale)
    {
        return invalid(format!("{name} row {k} sums to {s}, expected 0"));
    }
    Ok(())
}

impl FixedLaplacians {
    pub fn new(lr: Matrix, lc: Matrix, source: LaplacianSource) -> Result<Self> {
        check_laplacian("row Laplacian", &lr)?;
        check_laplacian("column Laplacian", &lc)?;
        Ok(Self { lr, lc, source })
    }

    /// Laplacians of `state` after `iter` updates.
    pub fn snapshot(state: &ModelState, iter: usize) -> Result<Self> {
        let (pr, pc) = state.laplacians()?;
        Self::new(pr.l, pc.l, LaplacianSource::FrozenAt { iter })
    }
}

/// Laplacian of the graph joining every pair of indices in the same group
/// with unit weight.
pub fn group_laplacian(groups: &[Vec<usize>], dim: usize) -> Result<Matrix> {
    let mut a = Matrix::zeros(dim, dim);
    for g in groups {
        for &k in g {
            for &l in g {
                if k >= dim || l >= dim {
                    return invalid(format!("group index out of range for dimension {dim}"));
                }
                if k != l {
                    a[(k, l)] = 1.0;
                }
            }
        }
    }
    Ok(laplacian_of(&a))
}

fn plain_state(chain: FactorChain) -> Result<ModelState> {
    let (m, n) = chain.shape();
    ModelState::new(
        chain,
        RegParam::constant(m, 0.0, Parameterization::Product)?,
        RegParam::constant(n, 0.0, Parameterization::Product)?,
        false,
    )
}

/// Same objective as [`crate::train::train`] with the Laplacians held fixed.
pub fn train_fixed_laplacian(
    chain: FactorChain,
    fixed: &FixedLaplacians,
    mask: &SamplingMask,
    y_obs: &[f64],
    cfg: &TrainConfig,
    truth: Option<&GroundTruth>,
) -> Result<TrainOutcome> {
    check_laplacian("row Laplacian", &fixed.lr)?;
    check_laplacian("column Laplacian", &fixed.lc)?;
    let penalty = Penalty::Fixed {
        lr: fixed.lr.clone(),
        lc: fixed.lc.clone(),
    };
    train_with(plain_state(chain)?, penalty, mask, y_obs, cfg, truth)
}

/// Plain deep matrix factorization.
pub fn train_dmf(
    chain: FactorChain,
    mask: &SamplingMask,
    y_obs: &[f64],
    cfg: &TrainConfig,
    truth: Option<&GroundTruth>,
) -> Result<TrainOutcome> {
    train_with(plain_state(chain)?, Penalty::None, mask, y_obs, cfg, truth)
}

/// Factorization with a smoothed total-variation penalty.
pub fn train_tv(
    chain: FactorChain,
    tv: TvConfig,
    mask: &SamplingMask,
    y_obs: &[f64],
    cfg: &TrainConfig,
    truth: Option<&GroundTruth>,
) -> Result<TrainOutcome> {
    train_with(
        plain_state(chain)?,
        Penalty::Tv(tv),
        mask,
        y_obs,
        cfg,
        truth,
    )
}
