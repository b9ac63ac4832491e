use std::path::PathBuf;
use std::process::ExitCode;

use air_cli::commands::{
    gen_data, gen_mask, run_baseline, run_eval, run_verify, BaselineMethod, VerifyKind,
    VerifyOverrides,
};
use air_cli::config::{ExperimentConfig, OptimizerConfig, RegMode};
use air_cli::io::write_json;
use air_cli::run::{run_complete, run_sweep, sweep_threads, SweepAxis, SweepValue};
use air_cli::CliError;
use air_core::train::NmaeKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "air",
    version,
    about = "Matrix completion with learned Laplacian regularization"
)]
struct Cli {
    /// JSON experiment config; relative input paths resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth matrix.
    GenData,
    /// Write the observation mask as a PGM (255 = observed).
    GenMask,
    /// Train the configured model and write trace, recovered matrix and report.
    Complete(TrainArgs),
    /// Run a comparison method on the configured problem.
    Baseline {
        #[arg(long, value_enum)]
        method: Method,
        /// Neighbours for knn.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Target rank for svd.
        #[arg(long, default_value_t = 10)]
        rank: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// One run per depth or width value; writes summary.csv.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; `min` means min(m, n).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<SweepValue>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Run a numerical verification suite; exit 3 if any check fails.
    Verify {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Score an estimate (CSV or PGM) against a ground truth under a mask.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, value_enum, default_value_t = Nmae::Squared)]
        nmae: Nmae,
    },
}

#[derive(Args, Default)]
struct TrainArgs {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Knn,
    Svd,
    Tv,
    Dmf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Depth,
    Width,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Thm1,
    Thm2,
    Balance,
    Gradcheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum Nmae {
    Squared,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Air,
    None,
    Tv,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(d) = self.depth {
            cfg.model.depth = d;
        }
        if let Some(w) = self.width {
            cfg.model.width = Some(w);
        }
        if let Some(new_lr) = self.lr {
            match &mut cfg.optimizer {
                OptimizerConfig::Gd { lr } | OptimizerConfig::Adam { lr, .. } => *lr = new_lr,
            }
        }
        if let Some(t) = self.max_iters {
            cfg.stopping.max_iters = t;
        }
        if let Some(mode) = self.mode {
            cfg.regularizer.mode = match mode {
                Mode::Air => RegMode::Air,
                Mode::None => RegMode::None,
                Mode::Tv => RegMode::Tv,
            };
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::GenData => println!("{}", gen_data(&cfg, &out_dir)?.display()),
        Command::GenMask => println!("{}", gen_mask(&cfg, &out_dir)?.display()),
        Command::Complete(args) => {
            args.apply(&mut cfg);
            print_json(&run_complete(&cfg, &out_dir)?);
        }
        Command::Baseline {
            method,
            k,
            rank,
            tol,
            max_rounds,
            train,
        } => {
            train.apply(&mut cfg);
            let method = match method {
                Method::Knn => BaselineMethod::Knn { k },
                Method::Svd => BaselineMethod::Svd {
                    rank,
                    tol,
                    max_rounds,
                },
                Method::Tv => BaselineMethod::Tv,
                Method::Dmf => BaselineMethod::Dmf,
            };
            print_json(&run_baseline(&cfg, method, &out_dir)?);
        }
        Command::Sweep {
            axis,
            values,
            train,
        } => {
            train.apply(&mut cfg);
            let axis = match axis {
                Axis::Depth => SweepAxis::Depth,
                Axis::Width => SweepAxis::Width,
            };
            let summary = run_sweep(&cfg, axis, &values, Some(&out_dir), sweep_threads())?;
            print!("{}", summary.to_csv());
            if axis == SweepAxis::Width {
                println!(
                    "# nmae non-increasing in width: {}",
                    summary.nmae_non_increasing()
                );
            }
        }
        Command::Verify {
            kind,
            lr,
            steps,
            tol,
        } => {
            let kind = match kind {
                Kind::Thm1 => VerifyKind::Thm1,
                Kind::Thm2 => VerifyKind::Thm2,
                Kind::Balance => VerifyKind::Balance,
                Kind::Gradcheck => VerifyKind::Gradcheck,
            };
            let report = run_verify(kind, cfg.seed, VerifyOverrides { lr, steps, tol })?;
            for line in report.verdict_lines() {
                println!("{line}");
            }
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(
                    dir.join(format!("verify_{}.csv", kind.name())),
                    report.to_csv(),
                )?;
            }
            if !report.passed() {
                let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
        Command::Eval {
            truth,
            mask,
            estimate,
            nmae,
        } => {
            let kind = match nmae {
                Nmae::Squared => NmaeKind::Squared,
                Nmae::Absolute => NmaeKind::Absolute,
            };
            let report = run_eval(&truth, &mask, &estimate, kind)?;
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir)?;
                write_json(&report, &dir.join("eval.json"))?;
            }
            print_json(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
