use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, SeededRng};

/// A fully known matrix together with its value range.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub full: Matrix,
    pub value_range: (f64, f64),
}

impl GroundTruth {
    pub fn new(full: Matrix) -> Result<Self> {
        if full.rows() == 0 || full.cols() == 0 {
            return invalid("ground truth must be non-empty");
        }
        if !full.is_finite() {
            return invalid("ground truth contains non-finite entries");
        }
        let value_range = (full.min(), full.max());
        Ok(Self { full, value_range })
    }

    pub fn range_width(&self) -> f64 {
        self.value_range.1 - self.value_range.0
    }
}

/// `G · Hᵀ` with standard-normal `G: m×rank` and `H: n×rank`.
pub fn gen_lowrank(rng: &mut SeededRng, m: usize, n: usize, rank: usize) -> Result<GroundTruth> {
    if rank == 0 || rank > m.min(n) {
        return invalid(format!("rank {rank} must lie in 1..={}", m.min(n)));
    }
    let g = gaussian_matrix(rng, m, rank, 0.0, 1.0)?;
    let h = gaussian_matrix(rng, n, rank, 0.0, 1.0)?;
    GroundTruth::new(g.matmul_t(&h))
}

/// Piecewise-constant ratings: rows split into `row_groups` contiguous groups
/// and columns into `col_groups`; each cell gets a base rating drawn uniformly
/// from `{1, ..., 5}`, plus optional `N(0, noise²)` perturbation per entry.
pub fn gen_block_ratings(
    rng: &mut SeededRng,
    m: usize,
    n: usize,
    row_groups: usize,
    col_groups: usize,
    noise: f64,
) -> Result<GroundTruth> {
    if row_groups == 0 || col_groups == 0 || m % row_groups != 0 || n % col_groups != 0 {
        return invalid(format!(
            "group counts {row_groups}x{col_groups} must divide the shape {m}x{n}"
        ));
    }
    if !(noise >= 0.0) {
        return invalid(format!("noise must be >= 0, got {noise}"));
    }
    let base: Vec<f64> = (0..row_groups * col_groups)
        .map(|_| rng.int_inclusive(1, 5) as f64)
        .collect();
    let (rh, cw) = (m / row_groups, n / col_groups);
    let mut full = Matrix::from_fn(m, n, |i, j| base[(i / rh) * col_groups + j / cw]);
    if noise > 0.0 {
        for x in full.as_mut_slice() {
            *x += rng.normal(0.0, noise);
        }
    }
    GroundTruth::new(full)
}

/// Partition of row indices into classes of rows that agree entrywise within
/// `tol`. Classes are ordered by their smallest member.
pub fn identical_row_groups(x: &Matrix, tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    'rows: for i in 0..x.rows() {
        for g in &mut groups {
            let rep = x.row(g[0]);
            if rep.iter().zip(x.row(i)).all(|(a, b)| (a - b).abs() <= tol) {
                g.push(i);
                continue 'rows;
            }
        }
        groups.push(vec![i]);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svd::singular_values;

    #[test]
    fn rank_one_minors_vanish() {
        let gt = gen_lowrank(&mut SeededRng::new(1), 3, 3, 1).unwrap();
        let x = &gt.full;
        for (i0, i1) in [(0, 1), (0, 2), (1, 2)] {
            for (j0, j1) in [(0, 1), (0, 2), (1, 2)] {
                let minor = x[(i0, j0)] * x[(i1, j1)] - x[(i0, j1)] * x[(i1, j0)];
                assert!(minor.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_five_is_exact() {
        let gt = gen_lowrank(&mut SeededRng::new(7), 100, 100, 5).unwrap();
        let s = singular_values(&gt.full).unwrap();
        assert!(s[5] / s[0] < 1e-10, "{}", s[5] / s[0]);
        assert!(s[4] / s[0] > 1e-3);
    }

    #[test]
    fn full_rank_request() {
        let gt = gen_lowrank(&mut SeededRng::new(2), 6, 4, 4).unwrap();
        let s = singular_values(&gt.full).unwrap();
        assert!(s[3] / s[0] > 1e-6);
        assert!(gen_lowrank(&mut SeededRng::new(2), 6, 4, 5).is_err());
    }

    #[test]
    fn block_rows_repeat_within_groups() {
        let gt = gen_block_ratings(&mut SeededRng::new(3), 4, 4, 2, 2, 0.0).unwrap();
        let x = &gt.full;
        assert_eq!(x.row(0), x.row(1));
        assert_eq!(x.row(2), x.row(3));
        assert!(x
            .as_slice()
            .iter()
            .all(|&v| (1.0..=5.0).contains(&v) && v.fract() == 0.0));
    }

    #[test]
    fn block_rank_bound() {
        let gt = gen_block_ratings(&mut SeededRng::new(4), 150, 200, 5, 4, 0.0).unwrap();
        let s = singular_values(&gt.full).unwrap();
        assert!(s[20] / s[0] < 1e-10);
    }

    #[test]
    fn duplicate_detector_recovers_groups() {
        let gt = gen_block_ratings(&mut SeededRng::new(5), 12, 10, 3, 2, 0.0).unwrap();
        let groups = identical_row_groups(&gt.full, 0.0);
        // Two row groups may draw identical ratings by chance; seed 5 does not.
        assert_eq!(
            groups,
            vec![
                (0..4).collect::<Vec<_>>(),
                (4..8).collect(),
                (8..12).collect()
            ]
        );
    }

    #[test]
    fn block_groups_must_divide() {
        assert!(gen_block_ratings(&mut SeededRng::new(0), 10, 10, 3, 2, 0.0).is_err());
        assert!(gen_block_ratings(&mut SeededRng::new(0), 10, 10, 0, 2, 0.0).is_err());
    }
}
