//! JSON experiment configuration.
//!
//! Every section has defaults, so `{}` is a valid config: a rank-5
//! 100×100 low-rank matrix with 80% of entries missing, completed by a
//! depth-3 factorization with the learned Laplacian penalty.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use air_core::data::MaskKind;
use air_core::dmf::InitScheme;
use air_core::reg::Parameterization;
use air_core::train::{AdamConfig, LambdaMode, NmaeKind, Optimizer, StopDelta, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub mask: MaskConfig,
    pub model: ModelConfig,
    pub regularizer: RegularizerConfig,
    pub optimizer: OptimizerConfig,
    pub stopping: StoppingConfig,
    pub logging: LoggingConfig,
    pub outputs: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Lowrank {
        m: usize,
        n: usize,
        rank: usize,
    },
    BlockRatings {
        m: usize,
        n: usize,
        row_groups: usize,
        col_groups: usize,
        #[serde(default)]
        noise: f64,
    },
    /// Grayscale PGM, scaled to `[0, 1]` for training.
    Image {
        path: PathBuf,
    },
    /// Plain numeric CSV, one matrix row per line.
    Csv {
        path: PathBuf,
    },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Lowrank {
            m: 100,
            n: 100,
            rank: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskConfig {
    /// `p` is the fraction of missing entries.
    Random {
        p: f64,
    },
    Patch {
        r0: usize,
        c0: usize,
        h: usize,
        w: usize,
    },
    Texture {
        period: usize,
        thickness: usize,
    },
    /// PGM mask, nonzero = observed.
    File {
        path: PathBuf,
    },
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig::Random { p: 0.8 }
    }
}

impl MaskConfig {
    pub fn kind(&self) -> Option<MaskKind> {
        match *self {
            MaskConfig::Random { p } => Some(MaskKind::Random { p }),
            MaskConfig::Patch { r0, c0, h, w } => Some(MaskKind::Patch { r0, c0, h, w }),
            MaskConfig::Texture { period, thickness } => {
                Some(MaskKind::Texture { period, thickness })
            }
            MaskConfig::File { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    /// `None` means `min(m, n)`.
    pub width: Option<usize>,
    pub init: InitConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            width: None,
            init: InitConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Gaussian { variance: f64 },
    BalancedIdentity { alpha: f64 },
    BalancedSpectral { scale: f64 },
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Gaussian { variance: 1e-5 }
    }
}

impl From<InitConfig> for InitScheme {
    fn from(c: InitConfig) -> Self {
        match c {
            InitConfig::Gaussian { variance } => InitScheme::Gaussian { variance },
            InitConfig::BalancedIdentity { alpha } => InitScheme::BalancedIdentity { alpha },
            InitConfig::BalancedSpectral { scale } => InitScheme::BalancedSpectral { scale },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMode {
    Air,
    None,
    Tv,
    /// Laplacians read from a JSON file `{"lr": [[..]], "lc": [[..]]}`.
    Fixed {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormConfig {
    #[default]
    Product,
    Sum,
}

impl From<FormConfig> for Parameterization {
    fn from(f: FormConfig) -> Self {
        match f {
            FormConfig::Product => Parameterization::Product,
            FormConfig::Sum => Parameterization::Sum,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaConfig {
    #[default]
    Auto,
    Explicit {
        row: f64,
        col: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizerConfig {
    pub mode: RegMode,
    pub parameterization: FormConfig,
    pub lambda: LambdaConfig,
    /// Variance of the Gaussian start of the learnable parameters.
    pub init_variance: f64,
    /// Smoothing for `tv` mode.
    pub tv_eps: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            mode: RegMode::Air,
            parameterization: FormConfig::Product,
            lambda: LambdaConfig::Auto,
            init_variance: 1e-5,
            tv_eps: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Gd {
        lr: f64,
    },
    Adam {
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_lr() -> f64 {
    AdamConfig::default().lr
}
fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_eps() -> f64 {
    AdamConfig::default().eps
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        OptimizerConfig::Adam {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaConfig {
    /// The string `"auto"`: `mn / 1000`.
    Named(AutoTag),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingConfig {
    pub max_iters: usize,
    /// Missing means `"auto"`.
    pub delta: Option<DeltaConfig>,
    /// Compare `λ·R` rather than `R` against `delta`.
    pub weighted_delta: bool,
    pub warmup: usize,
    pub target_obs_mse: Option<f64>,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            max_iters: t.max_iters,
            delta: None,
            weighted_delta: t.delta_on_weighted,
            warmup: t.warmup,
            target_obs_mse: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmaeConfig {
    #[default]
    Squared,
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingConfig {
    pub log_every: usize,
    pub track_singular_values: usize,
    pub nmae: NmaeConfig,
}

impl Default for LoggingConfig {
    fn default() -> Self {
        Self {
            log_every: 10,
            track_singular_values: 0,
            nmae: NmaeConfig::Squared,
        }
    }
}

/// Output file names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trace_csv: PathBuf,
    /// Defaults to `recovered.pgm` for image data and `recovered.csv` otherwise.
    pub recovered_path: Option<PathBuf>,
    pub report_path: PathBuf,
    /// Write the learned Laplacians after this many updates (air mode only).
    pub laplacian_snapshot: Option<SnapshotConfig>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace_csv: "trace.csv".into(),
            recovered_path: None,
            report_path: "report.json".into(),
            laplacian_snapshot: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    pub iter: usize,
    pub path: PathBuf,
}

impl ExperimentConfig {
    /// Reads a config; relative input paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_inputs(base);
        }
        Ok(cfg)
    }

    fn resolve_inputs(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataConfig::Image { path } | DataConfig::Csv { path } => fix(path),
            _ => {}
        }
        if let MaskConfig::File { path } = &mut self.mask {
            fix(path);
        }
        if let RegMode::Fixed { path } = &mut self.regularizer.mode {
            fix(path);
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let optimizer = match self.optimizer {
            OptimizerConfig::Gd { lr } => Optimizer::Gd { lr },
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => Optimizer::Adam(AdamConfig {
                lr,
                beta1,
                beta2,
                eps,
            }),
        };
        TrainConfig {
            optimizer,
            max_iters: self.stopping.max_iters,
            stop_delta: match self.stopping.delta {
                Some(DeltaConfig::Value(d)) => StopDelta::Value(d),
                _ => StopDelta::Auto,
            },
            delta_on_weighted: self.stopping.weighted_delta,
            warmup: self.stopping.warmup,
            target_obs_mse: self.stopping.target_obs_mse,
            lambda_mode: match self.regularizer.lambda {
                LambdaConfig::Auto => LambdaMode::Auto,
                LambdaConfig::Explicit { row, col } => LambdaMode::Explicit { row, col },
            },
            log_every: self.logging.log_every,
            track_singular_values: self.logging.track_singular_values,
            nmae_kind: match self.logging.nmae {
                NmaeConfig::Squared => NmaeKind::Squared,
                NmaeConfig::Absolute => NmaeKind::Absolute,
            },
        }
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config().validate().map_err(CliError::from)?;
        if self.model.depth < 2 {
            return Err(CliError::Usage(format!(
                "model.depth must be >= 2, got {}",
                self.model.depth
            )));
        }
        if self.model.width == Some(0) {
            return Err(CliError::Usage("model.width must be positive".into()));
        }
        if !(self.regularizer.init_variance >= 0.0) {
            return Err(CliError::Usage(
                "regularizer.init_variance must be >= 0".into(),
            ));
        }
        if matches!(self.regularizer.mode, RegMode::Tv) && !(self.regularizer.tv_eps > 0.0) {
            return Err(CliError::Usage(
                "regularizer.tv_eps must be positive".into(),
            ));
        }
        for p in self.input_paths() {
            if !p.exists() {
                return Err(CliError::Usage(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn input_paths(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        match &self.data {
            DataConfig::Image { path } | DataConfig::Csv { path } => out.push(path.as_path()),
            _ => {}
        }
        if let MaskConfig::File { path } = &self.mask {
            out.push(path);
        }
        if let RegMode::Fixed { path } = &self.regularizer.mode {
            out.push(path);
        }
        out
    }
}
