//! Subcommands other than training runs.

use std::fs;
use std::path::Path;

use air_core::baselines::{knn_impute, svd_impute};
use air_core::data::{read_mask_pgm, read_pgm, write_mask_pgm};
use air_core::theory::{
    gradcheck_suite, verify_balance, verify_theorem1, verify_theorem2, BalanceParams, FlowReport,
    LaplacianFlowParams, SigmaParams,
};
use air_core::train::metrics;
use air_core::{GroundTruth, Matrix, SeededRng};
use serde::Serialize;

use crate::config::{ExperimentConfig, RegMode};
use crate::error::CliError;
use crate::io::{read_matrix_csv, write_json};
use crate::run::{
    load_mask, load_truth, recovered_path, run_complete, write_recovered, Problem, Report,
};

/// Writes the ground truth as `truth.csv`, or `truth.pgm` for image data.
pub fn gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<std::path::PathBuf, CliError> {
    cfg.validate()?;
    let (truth, image) = load_truth(cfg)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(if image { "truth.pgm" } else { "truth.csv" });
    write_recovered(&truth.full, image, &path)?;
    Ok(path)
}

/// Writes the observation mask as `mask.pgm` (255 = observed).
pub fn gen_mask(cfg: &ExperimentConfig, out_dir: &Path) -> Result<std::path::PathBuf, CliError> {
    cfg.validate()?;
    let (truth, _) = load_truth(cfg)?;
    let (m, n) = truth.full.shape();
    let mask = load_mask(cfg, m, n)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("mask.pgm");
    write_mask_pgm(&mask, &path)?;
    Ok(path)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaselineMethod {
    Knn {
        k: usize,
    },
    Svd {
        rank: usize,
        tol: f64,
        max_rounds: usize,
    },
    Tv,
    Dmf,
}

/// Runs a comparison method on the configured problem and writes the
/// recovered matrix and report.
pub fn run_baseline(
    cfg: &ExperimentConfig,
    method: BaselineMethod,
    out_dir: &Path,
) -> Result<Report, CliError> {
    let train_mode = match method {
        BaselineMethod::Tv => Some(RegMode::Tv),
        BaselineMethod::Dmf => Some(RegMode::None),
        _ => None,
    };
    if let Some(mode) = train_mode {
        let mut c = cfg.clone();
        c.regularizer.mode = mode;
        return run_complete(&c, out_dir);
    }
    let problem = Problem::prepare(cfg)?;
    let y = &problem.truth.full;
    let (x, iters, stop) = match method {
        BaselineMethod::Knn { k } => (knn_impute(y, &problem.mask, k)?, 0, "closed_form"),
        BaselineMethod::Svd {
            rank,
            tol,
            max_rounds,
        } => {
            let out = svd_impute(y, &problem.mask, rank, tol, max_rounds)?;
            let stop = if out.change < tol {
                "converged"
            } else {
                "max_rounds"
            };
            (out.x, out.rounds, stop)
        }
        BaselineMethod::Tv | BaselineMethod::Dmf => unreachable!("trained baselines handled above"),
    };
    let report = Report::from_estimate(&x, &problem, cfg, iters, stop, (0.0, 0.0))?;
    fs::create_dir_all(out_dir)?;
    write_recovered(
        &x,
        problem.image,
        &out_dir.join(recovered_path(cfg, problem.image)),
    )?;
    write_json(&report, &out_dir.join(&cfg.outputs.report_path))?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyKind {
    Thm1,
    Thm2,
    Balance,
    Gradcheck,
}

impl VerifyKind {
    pub fn name(self) -> &'static str {
        match self {
            VerifyKind::Thm1 => "thm1",
            VerifyKind::Thm2 => "thm2",
            VerifyKind::Balance => "balance",
            VerifyKind::Gradcheck => "gradcheck",
        }
    }
}

/// Optional overrides of a verification suite's defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOverrides {
    pub lr: Option<f64>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
}

/// The three-row example: rows 1 and 2 coincide, row 3 differs.
pub fn three_row_example() -> Matrix {
    Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8], [0.8, 0.6]])
}

/// Runs a suite and returns its report; the caller decides the exit status.
pub fn run_verify(kind: VerifyKind, seed: u64, o: VerifyOverrides) -> Result<FlowReport, CliError> {
    let mut rng = SeededRng::new(seed);
    let report = match kind {
        VerifyKind::Gradcheck => gradcheck_suite(seed, o.tol.unwrap_or(1e-5))?,
        VerifyKind::Thm2 => {
            let mut p = LaplacianFlowParams::default();
            p.lr = o.lr.unwrap_or(p.lr);
            p.steps = o.steps.unwrap_or(p.steps);
            let flow = verify_theorem2(&three_row_example(), &p)?;
            let mut report = flow.report;
            report.checks.push(air_core::theory::Check::new(
                "rate report",
                true,
                format!(
                    "fitted rate {:.6e}, decay constant D = {:.6e}, gamma = {}",
                    flow.fitted_rate, flow.decay.d, flow.limit.gamma
                ),
            ));
            report
        }
        VerifyKind::Balance => {
            let mut p = BalanceParams::default();
            p.lr = o.lr.unwrap_or(p.lr);
            p.steps = o.steps.unwrap_or(p.steps);
            p.tol = o.tol.unwrap_or(p.tol);
            verify_balance(&p, &mut rng)?
        }
        VerifyKind::Thm1 => {
            let mut p = SigmaParams::default();
            p.lr = o.lr.unwrap_or(p.lr);
            p.steps = o.steps.unwrap_or(p.steps);
            p.tol = o.tol.unwrap_or(p.tol);
            verify_theorem1(&p, &mut rng)
                .map_err(|e| CliError::Usage(format!("out of contract: {e}")))?
                .report
        }
    };
    Ok(report)
}

/// Reads a matrix from CSV, or from PGM scaled to `[0, 1]`.
pub fn read_matrix_any(path: &Path) -> Result<Matrix, CliError> {
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        Ok(read_pgm(path)?.normalized())
    } else {
        read_matrix_csv(path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub nmae: f64,
    pub mse_obs: f64,
    pub mse_unobs: f64,
}

/// Scores an estimate against a ground truth under a mask.
pub fn run_eval(
    truth: &Path,
    mask: &Path,
    estimate: &Path,
    kind: air_core::train::NmaeKind,
) -> Result<EvalReport, CliError> {
    let truth = GroundTruth::new(read_matrix_any(truth)?)?;
    let mask = read_mask_pgm(mask)?;
    let x = read_matrix_any(estimate)?;
    let m = metrics(&x, &truth, &mask, kind)?;
    Ok(EvalReport {
        nmae: m.nmae,
        mse_obs: m.mse_obs,
        mse_unobs: m.mse_unobs,
    })
}
