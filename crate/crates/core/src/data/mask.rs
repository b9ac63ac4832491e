use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Boolean observation pattern. Defines the sampling operator (observed
/// entries, row-major) and its complement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Observed,
    Unobserved,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskKind {
    /// Exactly `round(p · rows · cols)` entries missing, chosen by a seeded shuffle.
    Random { p: f64 },
    /// An `h × w` rectangle with top-left corner `(r0, c0)` missing.
    Patch {
        r0: usize,
        c0: usize,
        h: usize,
        w: usize,
    },
    /// Rows and columns with `index % period < thickness` missing.
    Texture { period: usize, thickness: usize },
}

impl SamplingMask {
    /// Requires at least one observed entry. A fully observed mask is allowed;
    /// completion metrics reject it separately.
    pub fn new(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != rows * cols {
            return invalid(format!(
                "mask has {} entries, expected {}",
                observed.len(),
                rows * cols
            ));
        }
        if !observed.iter().any(|&b| b) {
            return invalid("mask observes no entries");
        }
        Ok(Self {
            rows,
            cols,
            observed,
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let observed = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::new(rows, cols, observed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn unobserved_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    pub(crate) fn check_shape(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.shape() {
            return invalid(format!(
                "matrix shape {:?} does not match mask shape {:?}",
                x.shape(),
                self.shape()
            ));
        }
        Ok(())
    }
}

/// Entries of `x` at the selected positions, in row-major order.
pub fn apply_mask(x: &Matrix, mask: &SamplingMask, which: Which) -> Result<Vec<f64>> {
    mask.check_shape(x)?;
    let want = which == Which::Observed;
    Ok(x.as_slice()
        .iter()
        .zip(&mask.observed)
        .filter(|(_, &obs)| obs == want)
        .map(|(&v, _)| v)
        .collect())
}

/// Adjoint of the sampling operator: scatters `values` back to the observed
/// positions and zero-fills the rest.
pub fn lift_observed(values: &[f64], mask: &SamplingMask) -> Result<Matrix> {
    if values.len() != mask.observed_count() {
        return invalid(format!(
            "{} values for {} observed entries",
            values.len(),
            mask.observed_count()
        ));
    }
    let mut out = Matrix::zeros(mask.rows, mask.cols);
    let mut it = values.iter();
    for (o, &obs) in out.as_mut_slice().iter_mut().zip(&mask.observed) {
        if obs {
            *o = *it.next().unwrap();
        }
    }
    Ok(out)
}

pub fn generate_mask(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    kind: &MaskKind,
) -> Result<SamplingMask> {
    if rows == 0 || cols == 0 {
        return invalid("mask dimensions must be positive");
    }
    let total = rows * cols;
    let observed = match *kind {
        MaskKind::Random { p } => {
            if !(p > 0.0 && p < 1.0) {
                return invalid(format!("missing rate must lie in (0, 1), got {p}"));
            }
            let missing = (p * total as f64).round() as usize;
            let mut idx: Vec<usize> = (0..total).collect();
            rng.shuffle(&mut idx);
            let mut observed = vec![true; total];
            for &k in &idx[..missing] {
                observed[k] = false;
            }
            observed
        }
        MaskKind::Patch { r0, c0, h, w } => {
            if h == 0 || w == 0 || r0 + h > rows || c0 + w > cols {
                return invalid(format!(
                    "patch ({r0},{c0}) of size {h}x{w} does not fit in {rows}x{cols}"
                ));
            }
            (0..total)
                .map(|k| {
                    let (i, j) = (k / cols, k % cols);
                    !((r0..r0 + h).contains(&i) && (c0..c0 + w).contains(&j))
                })
                .collect()
        }
        MaskKind::Texture { period, thickness } => {
            if period == 0 || thickness == 0 || thickness >= period {
                return invalid(format!(
                    "texture needs 0 < thickness < period, got thickness {thickness}, period {period}"
                ));
            }
            (0..total)
                .map(|k| {
                    let (i, j) = (k / cols, k % cols);
                    i % period >= thickness && j % period >= thickness
                })
                .collect()
        }
    };
    SamplingMask::new(rows, cols, observed)
}
