use crate::data::SamplingMask;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Root-mean-square difference over columns observed in both rows, or `None`
/// when the rows share no observed column.
fn row_distance(y: &Matrix, mask: &SamplingMask, a: usize, b: usize) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for j in 0..y.cols() {
        if mask.is_observed(a, j) && mask.is_observed(b, j) {
            let d = y[(a, j)] - y[(b, j)];
            sum += d * d;
            count += 1;
        }
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// Fills each missing `(i, j)` with the mean of `Y[i', j]` over the `k` rows
/// `i'` nearest to row `i` among those observing column `j`. Ties are broken
/// by row index. Falls back to the column mean when no row qualifies.
pub fn knn_impute(y: &Matrix, mask: &SamplingMask, k: usize) -> Result<Matrix> {
    let (m, n) = y.shape();
    if mask.shape() != (m, n) {
        return invalid(format!("mask is {:?}, data is {m}x{n}", mask.shape()));
    }
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if let Some(i) = (0..m).find(|&i| (0..n).all(|j| !mask.is_observed(i, j))) {
        return Err(Error::Impute(format!("row {i} has no observed entries")));
    }
    let dist: Vec<Vec<Option<f64>>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    if a == b {
                        None
                    } else {
                        row_distance(y, mask, a, b)
                    }
                })
                .collect()
        })
        .collect();
    let mut out = y.clone();
    for i in 0..m {
        for j in 0..n {
            if mask.is_observed(i, j) {
                continue;
            }
            let mut cands: Vec<(f64, usize)> = (0..m)
                .filter(|&r| mask.is_observed(r, j))
                .filter_map(|r| dist[i][r].map(|d| (d, r)))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out[(i, j)] = if cands.is_empty() {
                let col: Vec<f64> = (0..m)
                    .filter(|&r| mask.is_observed(r, j))
                    .map(|r| y[(r, j)])
                    .collect();
                if col.is_empty() {
                    return Err(Error::Impute(format!("column {j} has no observed entries")));
                }
                col.iter().sum::<f64>() / col.len() as f64
            } else {
                let take = &cands[..k.min(cands.len())];
                take.iter().map(|&(_, r)| y[(r, j)]).sum::<f64>() / take.len() as f64
            };
        }
    }
    Ok(out)
}
