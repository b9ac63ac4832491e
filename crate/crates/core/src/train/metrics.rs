use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{apply_mask, GroundTruth, SamplingMask, Which};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// Normalization of the unobserved-entry error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NmaeKind {
    /// `Σ (X − Y*)² / ((mn − o)(Y*max − Y*min))` over unobserved entries.
    #[default]
    Squared,
    /// `Σ |X − Y*| / ((mn − o)(Y*max − Y*min))` over unobserved entries.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mse_obs: f64,
    pub mse_unobs: f64,
    pub nmae: f64,
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Errors of `x` against the ground truth on observed and unobserved entries.
pub fn metrics(
    x: &Matrix,
    truth: &GroundTruth,
    mask: &SamplingMask,
    kind: NmaeKind,
) -> Result<Metrics> {
    if truth.full.shape() != x.shape() {
        return invalid(format!(
            "ground truth is {:?} but the estimate is {:?}",
            truth.full.shape(),
            x.shape()
        ));
    }
    let range = truth.range_width();
    if !(range > 0.0) {
        return invalid("ground truth has zero value range");
    }
    if mask.unobserved_count() == 0 {
        return invalid("normalized error needs at least one unobserved entry");
    }
    let xo = apply_mask(x, mask, Which::Observed)?;
    let yo = apply_mask(&truth.full, mask, Which::Observed)?;
    let xu = apply_mask(x, mask, Which::Unobserved)?;
    let yu = apply_mask(&truth.full, mask, Which::Unobserved)?;
    let numerator: f64 = match kind {
        NmaeKind::Squared => xu.iter().zip(&yu).map(|(a, b)| (a - b) * (a - b)).sum(),
        NmaeKind::Absolute => xu.iter().zip(&yu).map(|(a, b)| (a - b).abs()).sum(),
    };
    Ok(Metrics {
        mse_obs: mean_sq(&xo, &yo),
        mse_unobs: mean_sq(&xu, &yu),
        nmae: numerator / (xu.len() as f64 * range),
    })
}

/// `λr = λc = (max y − min y) / (m n)`.
pub fn auto_lambda(y_obs: &[f64], m: usize, n: usize) -> Result<(f64, f64)> {
    if y_obs.is_empty() {
        return invalid("no observations");
    }
    let hi = y_obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y_obs.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda = (hi - lo) / (m * n) as f64;
    Ok((lambda, lambda))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub total: f64,
    pub fidelity: f64,
    /// Unweighted row regularizer value.
    pub reg_row: f64,
    /// Unweighted column regularizer value.
    pub reg_col: f64,
    /// Mean squared error against the observations.
    pub mse_obs: f64,
    pub mse_unobs: Option<f64>,
    pub nmae: Option<f64>,
    /// Leading singular values of the estimate, when tracked.
    pub sigma: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricTrace {
    pub rows: Vec<MetricRow>,
    pub sigma_count: usize,
}

fn num(out: &mut String, x: f64) {
    write!(out, ",{x:.16e}").expect("writing to a String");
}

impl MetricTrace {
    pub fn new(sigma_count: usize) -> Self {
        Self {
            rows: Vec::new(),
            sigma_count,
        }
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    /// Smallest logged NMAE.
    pub fn min_nmae(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.nmae).reduce(f64::min)
    }

    /// CSV with 17 significant digits; metrics that need ground truth are
    /// left empty when it is unknown.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,total,fid,reg_r,reg_c,mse_obs,mse_unobs,nmae");
        for k in 1..=self.sigma_count {
            write!(out, ",sigma_{k}").expect("writing to a String");
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.iter).expect("writing to a String");
            for x in [r.total, r.fidelity, r.reg_row, r.reg_col, r.mse_obs] {
                num(&mut out, x);
            }
            for x in [r.mse_unobs, r.nmae] {
                match x {
                    Some(x) => num(&mut out, x),
                    None => out.push(','),
                }
            }
            for k in 0..self.sigma_count {
                num(&mut out, r.sigma.get(k).copied().unwrap_or(0.0));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}
