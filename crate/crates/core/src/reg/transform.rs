use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// Maps `X` to the matrix whose rows the regularizer compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    RowIdentity,
    ColumnTranspose,
    /// `grid_rows × grid_cols` equal blocks; row `j` of the output is the
    /// row-major vectorization of block `j`, blocks taken in row-major order.
    Block {
        grid_rows: usize,
        grid_cols: usize,
    },
}

fn block_dims(m: usize, n: usize, gr: usize, gc: usize) -> Result<(usize, usize)> {
    if gr == 0 || gc == 0 || m % gr != 0 || n % gc != 0 {
        return invalid(format!("block grid {gr}x{gc} does not divide {m}x{n}"));
    }
    Ok((m / gr, n / gc))
}

pub fn apply_transform(t: Transform, x: &Matrix) -> Result<Matrix> {
    match t {
        Transform::RowIdentity => Ok(x.clone()),
        Transform::ColumnTranspose => Ok(x.transpose()),
        Transform::Block {
            grid_rows,
            grid_cols,
        } => {
            let (bh, bw) = block_dims(x.rows(), x.cols(), grid_rows, grid_cols)?;
            Ok(Matrix::from_fn(grid_rows * grid_cols, bh * bw, |b, e| {
                let (bi, bj) = (b / grid_cols, b % grid_cols);
                x[(bi * bh + e / bw, bj * bw + e % bw)]
            }))
        }
    }
}

/// Inverse of [`apply_transform`] for a target shape `m × n`.
pub fn invert_transform(t: Transform, y: &Matrix, m: usize, n: usize) -> Result<Matrix> {
    let expected = match t {
        Transform::RowIdentity => (m, n),
        Transform::ColumnTranspose => (n, m),
        Transform::Block {
            grid_rows,
            grid_cols,
        } => {
            let (bh, bw) = block_dims(m, n, grid_rows, grid_cols)?;
            (grid_rows * grid_cols, bh * bw)
        }
    };
    if y.shape() != expected {
        return invalid(format!(
            "transformed matrix is {:?}, expected {expected:?}",
            y.shape()
        ));
    }
    match t {
        Transform::RowIdentity => Ok(y.clone()),
        Transform::ColumnTranspose => Ok(y.transpose()),
        Transform::Block {
            grid_rows,
            grid_cols,
        } => {
            let (bh, bw) = (m / grid_rows, n / grid_cols);
            Ok(Matrix::from_fn(m, n, |i, j| {
                let b = (i / bh) * grid_cols + j / bw;
                y[(b, (i % bh) * bw + j % bw)]
            }))
        }
    }
}
