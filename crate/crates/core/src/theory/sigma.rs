use crate::data::{generate_mask, MaskKind};
use crate::dmf::{initialize, residual, InitScheme};
use crate::error::{invalid, Result};
use crate::matrix::{dot, Matrix};
use crate::reg::{build_laplacian, Parameterization, RegParam};
use crate::rng::{gaussian_matrix, SeededRng};
use crate::svd::{svd, Svd};
use crate::train::{
    observations, LambdaMode, ModelState, Optimizer, Penalty, StopDelta, TrainConfig, Trainer,
};

use super::{Check, FlowReport};

/// Largest step size accepted as a stand-in for the continuous flow.
pub const MAX_FLOW_LR: f64 = 1e-4;
/// Checkpoints whose leading singular values are closer than this are skipped.
const GAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaTarget {
    /// Observations of `scale · N(0, 1)` entries.
    Random { scale: f64 },
    /// Observations of the initial product, so the fidelity gradient starts at zero.
    InitialFit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaParams {
    pub m: usize,
    pub n: usize,
    pub depth: usize,
    pub lr: f64,
    pub steps: usize,
    pub lambda_r: f64,
    pub lambda_c: f64,
    /// Fraction of unobserved entries.
    pub missing: f64,
    pub target: SigmaTarget,
    pub checkpoint_every: usize,
    /// Number of leading singular values compared.
    pub top_k: usize,
    /// Inclusive checkpoint range the verdict is based on.
    pub window: (usize, usize),
    /// Relative error accepted between measured and predicted rates.
    pub tol: f64,
    pub init_scale: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        Self {
            m: 8,
            n: 8,
            depth: 3,
            lr: 1e-5,
            steps: 1020,
            lambda_r: 0.5,
            lambda_c: 0.5,
            missing: 0.3,
            target: SigmaTarget::Random { scale: 2.0 },
            checkpoint_every: 10,
            top_k: 3,
            window: (10, 100),
            tol: 0.05,
            init_scale: 1.0,
        }
    }
}

/// Which weighting of the regularizer rate `γ_k` is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaVariant {
    /// `u_kᵀ Lr u_k + v_kᵀ Lc v_k`.
    Statement,
    /// `λr u_kᵀ Lr u_k + λc v_kᵀ Lc v_k`.
    Weighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaDynamicsRecord {
    pub checkpoint: usize,
    pub t: f64,
    pub k: usize,
    pub sigma: f64,
    /// Central difference over the neighbouring checkpoints.
    pub sigma_dot_measured: f64,
    /// `−L (σ²)^{1−1/L} ⟨∇ℓ, u vᵀ⟩`.
    pub term_fidelity: f64,
    pub gamma_statement: f64,
    pub gamma_weighted: f64,
    /// `−2L (σ²)^{3/2−1/L} γ` for each variant.
    pub term_reg_statement: f64,
    pub term_reg_weighted: f64,
    pub skipped: bool,
}

impl SigmaDynamicsRecord {
    pub fn predicted(&self, variant: GammaVariant) -> f64 {
        self.term_fidelity
            + match variant {
                GammaVariant::Statement => self.term_reg_statement,
                GammaVariant::Weighted => self.term_reg_weighted,
            }
    }

    pub fn relative_error(&self, variant: GammaVariant) -> f64 {
        let p = self.predicted(variant);
        (self.sigma_dot_measured - p).abs() / p.abs()
    }
}

#[derive(Clone, Debug)]
pub struct SigmaDynamics {
    pub report: FlowReport,
    pub records: Vec<SigmaDynamicsRecord>,
    /// All singular values at every checkpoint.
    pub sigma_trace: Vec<Vec<f64>>,
    pub selected: GammaVariant,
    pub max_error_statement: f64,
    pub max_error_weighted: f64,
}

struct Snapshot {
    svd: Svd,
    grad: Matrix,
}

/// Index in `other` best aligned with left singular vector `k` of `base`,
/// excluding indices already taken.
fn align(base: &Svd, other: &Svd, k: usize, taken: &[usize]) -> usize {
    let uk = base.u.column(k);
    (0..other.s.len())
        .filter(|j| !taken.contains(j))
        .max_by(|&a, &b| {
            let da = dot(&uk, &other.u.column(a)).abs();
            let db = dot(&uk, &other.u.column(b)).abs();
            da.total_cmp(&db)
        })
        .expect("at least one singular vector")
}

/// Integrates the regularized factorization flow with small-step gradient
/// descent from a balanced start and compares measured singular-value rates
/// with the closed-form prediction under both `γ_k` weightings.
pub fn verify_theorem1(params: &SigmaParams, rng: &mut SeededRng) -> Result<SigmaDynamics> {
    if !(params.lr > 0.0 && params.lr <= MAX_FLOW_LR) {
        return invalid(format!(
            "learning rate {} is outside the flow regime (0, {MAX_FLOW_LR}]",
            params.lr
        ));
    }
    let SigmaParams { m, n, depth, .. } = *params;
    let every = params.checkpoint_every.max(1);
    if params.top_k == 0 || params.top_k >= m.min(n) {
        return invalid(format!("top_k must lie in 1..{}", m.min(n)));
    }
    if params.steps < (params.window.1 + 1) * every {
        return invalid(format!(
            "{} steps do not reach checkpoint {}",
            params.steps,
            params.window.1 + 1
        ));
    }

    let chain = initialize(
        m,
        n,
        depth,
        m.min(n),
        InitScheme::BalancedSpectral {
            scale: params.init_scale,
        },
        rng,
    )?;
    let random_target = gaussian_matrix(rng, m, n, 0.0, 1.0)?;
    let mask = generate_mask(rng, m, n, &MaskKind::Random { p: params.missing })?;
    let lr_mat = build_laplacian(&RegParam::gaussian(rng, m, 1.0, Parameterization::Product)?)?.l;
    let lc_mat = build_laplacian(&RegParam::gaussian(rng, n, 1.0, Parameterization::Product)?)?.l;
    let target = match params.target {
        SigmaTarget::Random { scale } => random_target.scale(scale),
        SigmaTarget::InitialFit => chain.forward(),
    };
    let y = observations(&target, &mask)?;

    let state = ModelState::new(
        chain,
        RegParam::constant(m, 0.0, Parameterization::Product)?,
        RegParam::constant(n, 0.0, Parameterization::Product)?,
        false,
    )?;
    let cfg = TrainConfig {
        optimizer: Optimizer::Gd { lr: params.lr },
        max_iters: params.steps,
        stop_delta: StopDelta::Value(0.0),
        lambda_mode: LambdaMode::Explicit {
            row: params.lambda_r,
            col: params.lambda_c,
        },
        log_every: params.steps + 1,
        ..TrainConfig::default()
    };
    let penalty = Penalty::Fixed {
        lr: lr_mat.clone(),
        lc: lc_mat.clone(),
    };
    let mut trainer = Trainer::new(state, penalty, &mask, &y, cfg, None)?;
    let mut snaps = Vec::new();
    for step in 0..=params.steps {
        if step % every == 0 {
            let x = trainer.state().chain.forward();
            snaps.push(Snapshot {
                svd: svd(&x)?,
                grad: residual(&x, &mask, &y)?,
            });
        }
        if step < params.steps {
            trainer.step()?;
        }
    }

    let big_l = depth as f64;
    let dt = every as f64 * params.lr;
    let mut records = Vec::new();
    for c in 1..snaps.len() - 1 {
        let cur = &snaps[c].svd;
        let skipped = (0..params.top_k).any(|k| cur.s[k] - cur.s[k + 1] < GAP_TOL);
        let mut taken_prev = Vec::new();
        let mut taken_next = Vec::new();
        for k in 0..params.top_k {
            let jp = align(cur, &snaps[c - 1].svd, k, &taken_prev);
            let jn = align(cur, &snaps[c + 1].svd, k, &taken_next);
            taken_prev.push(jp);
            taken_next.push(jn);
            let measured = (snaps[c + 1].svd.s[jn] - snaps[c - 1].svd.s[jp]) / (2.0 * dt);
            let (u, v) = (cur.u.column(k), cur.v.column(k));
            let s2 = cur.s[k] * cur.s[k];
            let proj = dot(
                &u,
                &snaps[c]
                    .grad
                    .matmul(&Matrix::from_vec(n, 1, v.clone())?)
                    .into_vec(),
            );
            let term_fidelity = -big_l * s2.powf(1.0 - 1.0 / big_l) * proj;
            let ur = dot(
                &u,
                &lr_mat
                    .matmul(&Matrix::from_vec(m, 1, u.clone())?)
                    .into_vec(),
            );
            let vc = dot(
                &v,
                &lc_mat
                    .matmul(&Matrix::from_vec(n, 1, v.clone())?)
                    .into_vec(),
            );
            let gamma_statement = ur + vc;
            let gamma_weighted = params.lambda_r * ur + params.lambda_c * vc;
            let reg = |g: f64| -2.0 * big_l * s2.powf(1.5 - 1.0 / big_l) * g;
            records.push(SigmaDynamicsRecord {
                checkpoint: c,
                t: c as f64 * dt,
                k,
                sigma: cur.s[k],
                sigma_dot_measured: measured,
                term_fidelity,
                gamma_statement,
                gamma_weighted,
                term_reg_statement: reg(gamma_statement),
                term_reg_weighted: reg(gamma_weighted),
                skipped,
            });
        }
    }

    let in_window: Vec<&SigmaDynamicsRecord> = records
        .iter()
        .filter(|r| {
            !r.skipped && r.checkpoint >= params.window.0 && r.checkpoint <= params.window.1
        })
        .collect();
    let max_err = |v: GammaVariant| {
        in_window
            .iter()
            .map(|r| r.relative_error(v))
            .fold(0.0, f64::max)
    };
    let max_error_statement = max_err(GammaVariant::Statement);
    let max_error_weighted = max_err(GammaVariant::Weighted);
    let selected = if max_error_weighted <= max_error_statement {
        GammaVariant::Weighted
    } else {
        GammaVariant::Statement
    };

    let mut report = FlowReport::new(&[
        "checkpoint",
        "t",
        "k",
        "sigma",
        "sigma_dot",
        "term_fidelity",
        "term_reg_statement",
        "term_reg_weighted",
        "rel_err_statement",
        "rel_err_weighted",
    ]);
    for r in &records {
        report.rows.push(vec![
            r.checkpoint as f64,
            r.t,
            r.k as f64,
            r.sigma,
            r.sigma_dot_measured,
            r.term_fidelity,
            r.term_reg_statement,
            r.term_reg_weighted,
            r.relative_error(GammaVariant::Statement),
            r.relative_error(GammaVariant::Weighted),
        ]);
    }
    let skipped = records.iter().filter(|r| r.skipped).count() / params.top_k;
    report.checks.push(Check::new(
        "checkpoints usable",
        !in_window.is_empty(),
        format!(
            "{} records in window, {skipped} checkpoints skipped for near-degenerate gaps",
            in_window.len()
        ),
    ));
    let lambda_zero = params.lambda_r == 0.0 && params.lambda_c == 0.0;
    if lambda_zero {
        report.checks.push(Check::new(
            "fidelity-only rate",
            max_error_weighted < params.tol,
            format!("max relative error {max_error_weighted:.3e}"),
        ));
    } else {
        let best = max_error_statement.min(max_error_weighted);
        report.checks.push(Check::new(
            "regularized rate",
            best < params.tol,
            format!(
                "selected {selected:?}; max relative error statement {max_error_statement:.3e}, weighted {max_error_weighted:.3e}"
            ),
        ));
    }

    Ok(SigmaDynamics {
        report,
        records,
        sigma_trace: snaps.into_iter().map(|s| s.svd.s).collect(),
        selected,
        max_error_statement,
        max_error_weighted,
    })
}
