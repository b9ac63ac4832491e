//! Experiment orchestration: data and mask preparation, training, sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use air_core::baselines::{FixedLaplacians, LaplacianSource, TvConfig};
use air_core::data::{
    gen_block_ratings, gen_lowrank, generate_mask, read_mask_pgm, read_pgm, write_pgm,
};
use air_core::dmf::initialize;
use air_core::train::{metrics, observations, Metrics, Penalty, StopReason, Trainer};
use air_core::{
    Error, GroundTruth, Matrix, ModelState, Parameterization, RegParam, SamplingMask, SeededRng,
};
use serde::Serialize;

use crate::config::{DataConfig, ExperimentConfig, MaskConfig, RegMode};
use crate::error::CliError;
use crate::io::{read_matrix_csv, write_json, write_matrix_csv, LaplacianFile};

/// Independent random streams for data, mask, factors and regularizer.
struct Streams {
    data: SeededRng,
    mask: SeededRng,
    model: SeededRng,
    reg: SeededRng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut base = SeededRng::new(seed);
        Self {
            data: base.fork(1),
            mask: base.fork(2),
            model: base.fork(3),
            reg: base.fork(4),
        }
    }
}

/// Ground truth, observation mask and everything else read from disk.
#[derive(Clone, Debug)]
pub struct Problem {
    pub truth: GroundTruth,
    pub mask: SamplingMask,
    pub y_obs: Vec<f64>,
    /// Data came from a PGM image with values scaled to `[0, 1]`.
    pub image: bool,
    pub fixed: Option<FixedLaplacians>,
}

pub fn load_truth(cfg: &ExperimentConfig) -> Result<(GroundTruth, bool), CliError> {
    let mut rng = Streams::new(cfg.seed).data;
    Ok(match &cfg.data {
        DataConfig::Lowrank { m, n, rank } => (gen_lowrank(&mut rng, *m, *n, *rank)?, false),
        DataConfig::BlockRatings {
            m,
            n,
            row_groups,
            col_groups,
            noise,
        } => (
            gen_block_ratings(&mut rng, *m, *n, *row_groups, *col_groups, *noise)?,
            false,
        ),
        DataConfig::Image { path } => (GroundTruth::new(read_pgm(path)?.normalized())?, true),
        DataConfig::Csv { path } => (GroundTruth::new(read_matrix_csv(path)?)?, false),
    })
}

pub fn load_mask(
    cfg: &ExperimentConfig,
    rows: usize,
    cols: usize,
) -> Result<SamplingMask, CliError> {
    let mask = match (&cfg.mask, cfg.mask.kind()) {
        (MaskConfig::File { path }, _) => read_mask_pgm(path)?,
        (_, Some(kind)) => generate_mask(&mut Streams::new(cfg.seed).mask, rows, cols, &kind)?,
        (_, None) => unreachable!("every generated mask has a kind"),
    };
    if mask.shape() != (rows, cols) {
        return Err(CliError::Usage(format!(
            "mask is {:?} but the data is {rows}x{cols}",
            mask.shape()
        )));
    }
    Ok(mask)
}

impl Problem {
    /// Validates the config and loads or generates all inputs. Touches no
    /// output files.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let (truth, image) = load_truth(cfg)?;
        let (m, n) = truth.full.shape();
        let mask = load_mask(cfg, m, n)?;
        if mask.observed_count() == 0 {
            return Err(CliError::Usage("mask observes no entries".into()));
        }
        let y_obs = observations(&truth.full, &mask)?;
        let fixed = match &cfg.regularizer.mode {
            RegMode::Fixed { path } => {
                let (lr, lc) = LaplacianFile::read(path)?.matrices()?;
                if lr.shape() != (m, m) || lc.shape() != (n, n) {
                    return Err(CliError::Usage(format!(
                        "Laplacians {:?} and {:?} do not fit {m}x{n} data",
                        lr.shape(),
                        lc.shape()
                    )));
                }
                Some(FixedLaplacians::new(lr, lc, LaplacianSource::External)?)
            }
            _ => None,
        };
        Ok(Self {
            truth,
            mask,
            y_obs,
            image,
            fixed,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.truth.full.shape()
    }
}

/// Final metrics written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub nmae: Option<f64>,
    pub mse_obs: f64,
    pub mse_unobs: Option<f64>,
    pub iters: usize,
    pub stop_reason: String,
    pub lambda_row: f64,
    pub lambda_col: f64,
}

impl Report {
    pub fn from_estimate(
        x: &Matrix,
        problem: &Problem,
        cfg: &ExperimentConfig,
        iters: usize,
        stop_reason: &str,
        lambda: (f64, f64),
    ) -> Result<Self, CliError> {
        let kind = cfg.train_config().nmae_kind;
        let (nmae, mse_unobs, mse_obs) = match metrics(x, &problem.truth, &problem.mask, kind) {
            Ok(Metrics {
                mse_obs,
                mse_unobs,
                nmae,
            }) => (Some(nmae), Some(mse_unobs), mse_obs),
            Err(Error::InvalidInput(_)) => {
                let xo = observations(x, &problem.mask)?;
                let mse = xo
                    .iter()
                    .zip(&problem.y_obs)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / xo.len() as f64;
                (None, None, mse)
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            nmae,
            mse_obs,
            mse_unobs,
            iters,
            stop_reason: stop_reason.to_string(),
            lambda_row: lambda.0,
            lambda_col: lambda.1,
        })
    }
}

/// Everything a finished training run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub x: Matrix,
    pub state: ModelState,
    pub trace: air_core::train::MetricTrace,
    pub stop: StopReason,
    pub report: Report,
    pub snapshot: Option<FixedLaplacians>,
}

fn plain_reg(m: usize, n: usize) -> Result<(RegParam, RegParam), CliError> {
    Ok((
        RegParam::constant(m, 0.0, Parameterization::Product)?,
        RegParam::constant(n, 0.0, Parameterization::Product)?,
    ))
}

/// Trains the configured model. When `out_dir` is given and training fails
/// numerically, the trace logged so far is written before returning.
pub fn train_model(
    cfg: &ExperimentConfig,
    problem: &Problem,
    out_dir: Option<&Path>,
) -> Result<RunOutput, CliError> {
    let (m, n) = problem.shape();
    let mut streams = Streams::new(cfg.seed);
    let width = cfg.model.width.unwrap_or(m.min(n));
    let chain = initialize(
        m,
        n,
        cfg.model.depth,
        width,
        cfg.model.init.into(),
        &mut streams.model,
    )?;
    let train_cfg = cfg.train_config();
    let form: Parameterization = cfg.regularizer.parameterization.into();
    let (state, penalty) = match &cfg.regularizer.mode {
        RegMode::Air => (
            ModelState::with_gaussian_reg(
                chain,
                form,
                cfg.regularizer.init_variance,
                &mut streams.reg,
            )?,
            Penalty::Learned,
        ),
        mode => {
            let (rr, rc) = plain_reg(m, n)?;
            let state = ModelState::new(chain, rr, rc, false)?;
            let penalty = match mode {
                RegMode::None => Penalty::None,
                RegMode::Tv => {
                    let (weight, _) = train_cfg.resolve_lambda(&problem.y_obs, m, n)?;
                    Penalty::Tv(TvConfig {
                        eps: cfg.regularizer.tv_eps,
                        weight,
                    })
                }
                _ => {
                    let f = problem
                        .fixed
                        .as_ref()
                        .ok_or_else(|| CliError::Usage("fixed mode needs Laplacians".into()))?;
                    Penalty::Fixed {
                        lr: f.lr.clone(),
                        lc: f.lc.clone(),
                    }
                }
            };
            (state, penalty)
        }
    };
    let mut trainer = Trainer::new(
        state,
        penalty,
        &problem.mask,
        &problem.y_obs,
        train_cfg,
        Some(&problem.truth),
    )?;
    let snap_at = match cfg.regularizer.mode {
        RegMode::Air => cfg.outputs.laplacian_snapshot.as_ref().map(|s| s.iter),
        _ => None,
    };
    let mut snapshot = None;
    let stop = loop {
        if snap_at == Some(trainer.iter()) && snapshot.is_none() {
            snapshot = Some(FixedLaplacians::snapshot(trainer.state(), trainer.iter())?);
        }
        match trainer.step() {
            Ok(Some(reason)) => break reason,
            Ok(None) => {}
            Err(e) => {
                if let Some(dir) = out_dir {
                    fs::create_dir_all(dir)?;
                    trainer
                        .trace()
                        .write_csv(dir.join(&cfg.outputs.trace_csv))?;
                }
                return Err(e.into());
            }
        }
    };
    let iters = trainer.iter();
    let lambda = trainer.lambda();
    let (state, trace) = trainer.into_parts();
    let x = state.chain.forward();
    let report = Report::from_estimate(&x, problem, cfg, iters, stop.as_str(), lambda)?;
    Ok(RunOutput {
        x,
        state,
        trace,
        stop,
        report,
        snapshot,
    })
}

pub fn recovered_path(cfg: &ExperimentConfig, image: bool) -> PathBuf {
    cfg.outputs.recovered_path.clone().unwrap_or_else(|| {
        if image {
            "recovered.pgm".into()
        } else {
            "recovered.csv".into()
        }
    })
}

/// Writes a recovered matrix: 8-bit PGM for image data, CSV otherwise.
pub fn write_recovered(x: &Matrix, image: bool, path: &Path) -> Result<(), CliError> {
    if image {
        write_pgm(&x.scale(255.0), path)?;
    } else {
        write_matrix_csv(x, path)?;
    }
    Ok(())
}

pub fn write_run(
    cfg: &ExperimentConfig,
    problem: &Problem,
    run: &RunOutput,
    dir: &Path,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    run.trace.write_csv(dir.join(&cfg.outputs.trace_csv))?;
    write_recovered(
        &run.x,
        problem.image,
        &dir.join(recovered_path(cfg, problem.image)),
    )?;
    write_json(&run.report, &dir.join(&cfg.outputs.report_path))?;
    if let (Some(snap), Some(snap_cfg)) = (&run.snapshot, &cfg.outputs.laplacian_snapshot) {
        LaplacianFile::new(&snap.lr, &snap.lc).write(&dir.join(&snap_cfg.path))?;
    }
    Ok(())
}

/// Full `complete` run: prepare, train, write artifacts.
pub fn run_complete(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report, CliError> {
    let problem = Problem::prepare(cfg)?;
    let run = train_model(cfg, &problem, Some(out_dir))?;
    write_run(cfg, &problem, &run, out_dir)?;
    Ok(run.report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Depth,
    Width,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Depth => "depth",
            SweepAxis::Width => "width",
        }
    }
}

/// A sweep value; `Min` stands for `min(m, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepValue {
    Fixed(usize),
    Min,
}

impl std::str::FromStr for SweepValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "min" {
            return Ok(SweepValue::Min);
        }
        s.trim()
            .parse()
            .map(SweepValue::Fixed)
            .map_err(|_| format!("sweep value must be a positive integer or \"min\", got {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub outcome: Result<Report, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},status,nmae,mse_obs,mse_unobs,iters,stop_reason,error\n",
            self.axis.name()
        );
        for r in &self.rows {
            let line = match &r.outcome {
                Ok(rep) => format!(
                    "{},ok,{},{:.16e},{},{},{},",
                    r.value,
                    opt(rep.nmae),
                    rep.mse_obs,
                    opt(rep.mse_unobs),
                    rep.iters,
                    rep.stop_reason
                ),
                Err(msg) => format!("{},failed,,,,,,\"{}\"", r.value, msg.replace('"', "'")),
            };
            writeln!(out, "{line}").expect("writing to a String");
        }
        out
    }

    /// NMAE never increases along the sweep order, over successful runs.
    pub fn nmae_non_increasing(&self) -> bool {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().and_then(|rep| rep.nmae))
            .collect();
        vals.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Worker count: `AIR_THREADS` if set, otherwise the available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("AIR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// One run per value with the shared seed. Runs are independent and may
/// execute in parallel; each writes only into its own subdirectory. A failed
/// run is recorded and the sweep continues.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[SweepValue],
    out_dir: Option<&Path>,
    threads: usize,
) -> Result<SweepSummary, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let problem = Problem::prepare(cfg)?;
    let (m, n) = problem.shape();
    let resolved: Vec<usize> = values
        .iter()
        .map(|v| match v {
            SweepValue::Fixed(k) => *k,
            SweepValue::Min => m.min(n),
        })
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; resolved.len()]);
    let workers = threads.clamp(1, resolved.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&value) = resolved.get(k) else { break };
                let mut run_cfg = cfg.clone();
                match axis {
                    SweepAxis::Depth => run_cfg.model.depth = value,
                    SweepAxis::Width => run_cfg.model.width = Some(value),
                }
                let dir = out_dir.map(|d| d.join(format!("{}_{value}", axis.name())));
                let outcome = run_cfg
                    .validate()
                    .and_then(|()| train_model(&run_cfg, &problem, dir.as_deref()))
                    .and_then(|run| {
                        if let Some(d) = &dir {
                            write_run(&run_cfg, &problem, &run, d)?;
                        }
                        Ok(run.report)
                    })
                    .map_err(|e| e.to_string());
                if let Err(msg) = &outcome {
                    log::warn!("{} {value} failed: {msg}", axis.name());
                }
                results.lock().expect("sweep results lock")[k] = Some(SweepRow { value, outcome });
            });
        }
    });
    let rows = results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every sweep member ran"))
        .collect();
    let summary = SweepSummary { axis, rows };
    if let Some(d) = out_dir {
        fs::create_dir_all(d)?;
        fs::write(d.join("summary.csv"), summary.to_csv())?;
    }
    Ok(summary)
}
