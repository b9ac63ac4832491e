use crate::data::SamplingMask;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::svd::svd;

#[derive(Clone, Debug)]
pub struct SvdImpute {
    pub x: Matrix,
    pub rounds: usize,
    /// Frobenius norm of the last change to the missing entries.
    pub change: f64,
}

/// Iterative rank-`rank` imputation: start from column means, then alternate
/// truncated SVD and overwriting the missing entries until they move by less
/// than `tol` or `max_rounds` is reached.
pub fn svd_impute(
    y: &Matrix,
    mask: &SamplingMask,
    rank: usize,
    tol: f64,
    max_rounds: usize,
) -> Result<SvdImpute> {
    let (m, n) = y.shape();
    if mask.shape() != (m, n) {
        return invalid(format!("mask is {:?}, data is {m}x{n}", mask.shape()));
    }
    if rank == 0 || rank > m.min(n) {
        return invalid(format!("rank {rank} must lie in 1..={}", m.min(n)));
    }
    if max_rounds == 0 {
        return invalid("max_rounds must be at least 1");
    }
    let observed: Vec<f64> = (0..m * n)
        .filter(|&k| mask.as_slice()[k])
        .map(|k| y.as_slice()[k])
        .collect();
    let global = observed.iter().sum::<f64>() / observed.len() as f64;
    let mut x = y.clone();
    for j in 0..n {
        let col: Vec<f64> = (0..m)
            .filter(|&i| mask.is_observed(i, j))
            .map(|i| y[(i, j)])
            .collect();
        let fill = if col.is_empty() {
            global
        } else {
            col.iter().sum::<f64>() / col.len() as f64
        };
        for i in 0..m {
            if !mask.is_observed(i, j) {
                x[(i, j)] = fill;
            }
        }
    }
    let mut rounds = 0;
    let mut change = f64::INFINITY;
    while rounds < max_rounds {
        rounds += 1;
        let low = svd(&x)?.truncated(rank);
        let mut sq = 0.0;
        for (k, &obs) in mask.as_slice().iter().enumerate() {
            if !obs {
                let d = low.as_slice()[k] - x.as_slice()[k];
                sq += d * d;
                x.as_mut_slice()[k] = low.as_slice()[k];
            }
        }
        change = sq.sqrt();
        if change < tol {
            break;
        }
    }
    Ok(SvdImpute { x, rounds, change })
}
