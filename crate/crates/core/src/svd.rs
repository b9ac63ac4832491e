//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Rotations are applied to the columns of the taller orientation of the input
//! until every column pair is orthogonal to working precision. Singular values
//! are then the column norms. Each left singular vector is signed so that its
//! largest-magnitude entry is positive, which makes the factors deterministic
//! whenever the singular values are distinct.

use crate::error::{invalid, Result};
use crate::matrix::{dot, Matrix};

const ROTATION_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;

/// `input = u · diag(s) · vᵀ` with `u: m×k`, `v: n×k`, `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v)
    }

    /// Rank-`r` truncation `u_r · diag(s_r) · v_rᵀ`.
    pub fn truncated(&self, r: usize) -> Matrix {
        let r = r.min(self.s.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(m, n);
        for k in 0..r {
            let s = self.s[k];
            for i in 0..m {
                let a = s * self.u[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for (o, j) in out.row_mut(i).iter_mut().zip(0..n) {
                    *o += a * self.v[(j, k)];
                }
            }
        }
        out
    }
}

pub fn svd(x: &Matrix) -> Result<Svd> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return invalid("svd of an empty matrix");
    }
    if !x.is_finite() {
        return invalid("svd input contains NaN or infinite entries");
    }
    if m >= n {
        Ok(tall_svd(x))
    } else {
        let t = tall_svd(&x.transpose());
        let mut out = Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
        fix_signs(&mut out);
        Ok(out)
    }
}

pub fn singular_values(x: &Matrix) -> Result<Vec<f64>> {
    svd(x).map(|d| d.s)
}

fn tall_svd(x: &Matrix) -> Svd {
    let (m, n) = x.shape();
    // Column-major working copies so that rotations touch contiguous memory.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| x.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut v_sorted = Vec::with_capacity(n);
    for &j in &order {
        let sigma = norms[j];
        s.push(sigma);
        v_sorted.push(v[j].clone());
        if sigma > 0.0 {
            u_cols.push(Some(a[j].iter().map(|x| x / sigma).collect()));
        } else {
            u_cols.push(None);
        }
    }
    let u_cols = complete_basis(m, u_cols);

    let mut out = Svd {
        u: Matrix::from_fn(m, n, |i, k| u_cols[k][i]),
        s,
        v: Matrix::from_fn(n, n, |i, k| v_sorted[k][i]),
    };
    fix_signs(&mut out);
    out
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (xp, xq) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Fills the left vectors of exactly-zero singular values with unit vectors
/// orthogonal to everything already present.
fn complete_basis(m: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut done: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut out = Vec::with_capacity(cols.len());
    for col in cols {
        match col {
            Some(c) => out.push(c),
            None => {
                let mut best: Option<Vec<f64>> = None;
                let mut best_norm = 0.0;
                for e in 0..m {
                    let mut cand = vec![0.0; m];
                    cand[e] = 1.0;
                    for _ in 0..2 {
                        for d in &done {
                            let p = dot(d, &cand);
                            for (ci, di) in cand.iter_mut().zip(d) {
                                *ci -= p * di;
                            }
                        }
                    }
                    let norm = dot(&cand, &cand).sqrt();
                    if norm > best_norm {
                        best_norm = norm;
                        best = Some(cand.into_iter().map(|x| x / norm).collect());
                    }
                    if best_norm > 0.5 {
                        break;
                    }
                }
                let c = best.expect("basis completion needs a free direction");
                done.push(c.clone());
                out.push(c);
            }
        }
    }
    out
}

fn fix_signs(d: &mut Svd) {
    let (m, k) = d.u.shape();
    for c in 0..k {
        let mut pivot = 0;
        for i in 1..m {
            if d.u[(i, c)].abs() > d.u[(pivot, c)].abs() {
                pivot = i;
            }
        }
        if d.u[(pivot, c)] < 0.0 {
            for i in 0..m {
                d.u[(i, c)] = -d.u[(i, c)];
            }
            for i in 0..d.v.rows() {
                d.v[(i, c)] = -d.v[(i, c)];
            }
        }
    }
}
