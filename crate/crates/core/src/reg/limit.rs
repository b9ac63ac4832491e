//! Limits of the regularizer flow on a fixed matrix with unit-norm positive
//! rows, and the decay constant governing how fast the energy vanishes.

use crate::error::{invalid, Result};
use crate::matrix::{dot, Matrix};

use super::laplacian_of;

/// Rows closer than this (max-abs) count as identical.
const IDENTICAL_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-9;

/// Ordered off-diagonal index pairs split by whether the rows coincide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSets {
    /// Pairs of distinct rows.
    pub distinct: Vec<(usize, usize)>,
    /// Pairs of identical rows.
    pub identical: Vec<(usize, usize)>,
}

pub fn pair_sets(m: &Matrix) -> PairSets {
    let mut sets = PairSets {
        distinct: Vec::new(),
        identical: Vec::new(),
    };
    for k in 0..m.rows() {
        for l in 0..m.rows() {
            if k == l {
                continue;
            }
            let same = m
                .row(k)
                .iter()
                .zip(m.row(l))
                .all(|(a, b)| (a - b).abs() <= IDENTICAL_TOL);
            if same {
                sets.identical.push((k, l));
            } else {
                sets.distinct.push((k, l));
            }
        }
    }
    sets
}

fn check_hypotheses(m: &Matrix) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return invalid("empty matrix");
    }
    for k in 0..m.rows() {
        let row = m.row(k);
        if let Some(x) = row.iter().find(|&&x| !(x > 0.0)) {
            return invalid(format!("row {k} has non-positive entry {x}"));
        }
        let norm2 = dot(row, row);
        if (norm2 - 1.0).abs() > UNIT_NORM_TOL {
            return invalid(format!("row {k} has squared norm {norm2}, expected 1"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitLaplacian {
    pub a_star: Matrix,
    pub l_star: Matrix,
    pub gamma: f64,
    /// Number of unordered identical-row pairs.
    pub s: usize,
}

/// Limiting adjacency `γ` on the diagonal and on identical-row pairs (zero
/// elsewhere), `γ = 2 / (m + 2s)`, and its Laplacian.
pub fn limit_laplacian(m: &Matrix) -> Result<LimitLaplacian> {
    check_hypotheses(m)?;
    let sets = pair_sets(m);
    let s = sets.identical.len() / 2;
    let gamma = 2.0 / (m.rows() + 2 * s) as f64;
    let mut a_star = Matrix::identity(m.rows()).scale(gamma);
    for &(k, l) in &sets.identical {
        a_star[(k, l)] = gamma;
    }
    let l_star = laplacian_of(&a_star);
    Ok(LimitLaplacian {
        a_star,
        l_star,
        gamma,
        s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decay {
    pub d: f64,
    /// Set when all rows coincide, in which case `d = 0`.
    pub degenerate: bool,
}

/// `D = min over distinct pairs of 4 (1 − ⟨M_k, M_l⟩) / m²`.
pub fn decay_constant(m: &Matrix) -> Result<Decay> {
    check_hypotheses(m)?;
    let rows = m.rows() as f64;
    let d = pair_sets(m)
        .distinct
        .iter()
        .map(|&(k, l)| 4.0 * (1.0 - dot(m.row(k), m.row(l))) / (rows * rows))
        .fold(f64::INFINITY, f64::min);
    Ok(if d.is_finite() {
        Decay {
            d,
            degenerate: false,
        }
    } else {
        Decay {
            d: 0.0,
            degenerate: true,
        }
    })
}

/// Shifts all entries by `eps − min` when any entry is non-positive, then
/// scales each row to unit norm.
pub fn normalize_rows_positive(m: &Matrix, eps: f64) -> Result<Matrix> {
    if !m.is_finite() {
        return invalid("matrix contains non-finite entries");
    }
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let lo = m.min();
    let mut out = if lo <= 0.0 {
        m.map(|x| x + eps - lo)
    } else {
        m.clone()
    };
    for k in 0..out.rows() {
        let row = out.row_mut(k);
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            return invalid(format!("row {k} is zero"));
        }
        row.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_rows() -> Matrix {
        Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8], [0.8, 0.6]])
    }

    #[test]
    fn three_row_limit() {
        let lim = limit_laplacian(&three_rows()).unwrap();
        assert_eq!(lim.s, 1);
        assert!((lim.gamma - 0.4).abs() < 1e-15);
        let want = Matrix::from_rows(&[[0.4, -0.4, 0.0], [-0.4, 0.4, 0.0], [0.0, 0.0, 0.0]]);
        assert!(lim.l_star.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn identical_rows_limit() {
        let m = Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8]]);
        let lim = limit_laplacian(&m).unwrap();
        assert_eq!((lim.s, lim.gamma), (1, 0.5));
        assert!(
            lim.l_star
                .max_abs_diff(&Matrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]))
                < 1e-15
        );
    }

    #[test]
    fn distinct_rows_limit() {
        let m = normalize_rows_positive(
            &Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]]),
            1e-3,
        )
        .unwrap();
        let lim = limit_laplacian(&m).unwrap();
        assert_eq!(lim.s, 0);
        assert!((lim.gamma - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lim.l_star.max_abs(), 0.0);
    }

    #[test]
    fn hypotheses_enforced() {
        let err = limit_laplacian(&Matrix::from_rows(&[[0.6, 0.8], [3.0, 4.0]])).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(limit_laplacian(&Matrix::from_rows(&[[1.0, 0.0]])).is_err());
    }

    #[test]
    fn permuting_rows_conjugates_limit() {
        let m = three_rows();
        let perm = [2, 0, 1];
        let lim = limit_laplacian(&m).unwrap().l_star;
        let lim_p = limit_laplacian(&m.select_rows(&perm)).unwrap().l_star;
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(lim_p[(i, j)], lim[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn decay_examples() {
        let d = decay_constant(&three_rows()).unwrap();
        assert!(!d.degenerate);
        assert!((d.d - 4.0 * 0.04 / 9.0).abs() < 1e-15);
        let same = decay_constant(&Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8]])).unwrap();
        assert!(same.degenerate && same.d == 0.0);
        // ⟨r1, r2⟩ = 0.5 for two positive unit rows.
        let c = (0.5f64).acos() / 2.0;
        let (a, b) = (
            (std::f64::consts::FRAC_PI_4 - c).cos(),
            (std::f64::consts::FRAC_PI_4 - c).sin(),
        );
        let m = Matrix::from_rows(&[[a, b], [b, a]]);
        assert!((decay_constant(&m).unwrap().d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalization() {
        let unit = three_rows();
        assert!(
            normalize_rows_positive(&unit, 0.01)
                .unwrap()
                .max_abs_diff(&unit)
                < 1e-12
        );
        let scaled = normalize_rows_positive(&Matrix::from_rows(&[[3.0, 4.0]]), 0.01).unwrap();
        assert!(scaled.max_abs_diff(&Matrix::from_rows(&[[0.6, 0.8]])) < 1e-15);
        let m = Matrix::from_rows(&[[-1.0, 2.0], [0.5, 1.0]]);
        let out = normalize_rows_positive(&m, 0.01).unwrap();
        // Shift by 1.01: rows (0.01, 3.01) and (1.51, 2.01).
        for (k, row) in [[0.01f64, 3.01], [1.51, 2.01]].iter().enumerate() {
            let norm = (row[0] * row[0] + row[1] * row[1]).sqrt();
            assert!((out[(k, 0)] - row[0] / norm).abs() < 1e-15);
            assert!((out[(k, 1)] - row[1] / norm).abs() < 1e-15);
        }
        assert!(normalize_rows_positive(&m, 0.0).is_err());
    }
}
