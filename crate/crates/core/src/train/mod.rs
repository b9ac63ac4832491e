//! Full-batch training of the regularized factorization.
//!
//! The objective is `½‖Y − 𝒜(X)‖² + λr tr(XᵀLrX) + λc tr(X Lc Xᵀ)` with
//! `X` the product of the factor chain and `Lr`, `Lc` built from learnable
//! parameters. Factors and regularizer parameters are updated jointly by one
//! optimizer.

mod adam;
mod metrics;

pub use adam::{adam_step, AdamConfig, AdamMoments};
pub use metrics::{auto_lambda, metrics, MetricRow, MetricTrace, Metrics, NmaeKind};

use crate::baselines::{tv_value_and_grad, TvConfig};
use crate::data::{apply_mask, GroundTruth, SamplingMask, Which};
use crate::dmf::{residual, FactorChain};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::reg::{
    build_laplacian, dirichlet_energy, grad_from_pair, LaplacianPair, Parameterization, RegParam,
};
use crate::rng::SeededRng;
use crate::svd::singular_values;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Gd { lr: f64 },
    Adam(AdamConfig),
}

impl Optimizer {
    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Gd { lr } => *lr,
            Optimizer::Adam(c) => c.lr,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam(AdamConfig::default())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum LambdaMode {
    /// `(max y − min y) / (mn)` for both terms.
    #[default]
    Auto,
    Explicit {
        row: f64,
        col: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum StopDelta {
    /// `mn / 1000`.
    #[default]
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Maximum number of parameter updates.
    pub max_iters: usize,
    pub stop_delta: StopDelta,
    /// Compare `λ·R` rather than `R` against the stopping threshold.
    pub delta_on_weighted: bool,
    /// Iterations before the regularizer-delta test is allowed to stop a run.
    pub warmup: usize,
    /// Stop once the observed-entry MSE drops below this value.
    pub target_obs_mse: Option<f64>,
    pub lambda_mode: LambdaMode,
    pub log_every: usize,
    /// Number of leading singular values recorded per logged row (0 = off).
    pub track_singular_values: usize,
    pub nmae_kind: NmaeKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            max_iters: 10_000,
            stop_delta: StopDelta::Auto,
            delta_on_weighted: true,
            warmup: 500,
            target_obs_mse: None,
            lambda_mode: LambdaMode::Auto,
            log_every: 10,
            track_singular_values: 0,
            nmae_kind: NmaeKind::Squared,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = self.optimizer.lr();
        if !(lr > 0.0) || !lr.is_finite() {
            return invalid(format!("learning rate must be positive, got {lr}"));
        }
        if let Optimizer::Adam(c) = self.optimizer {
            if !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) || !(c.eps > 0.0) {
                return invalid(format!("invalid Adam hyperparameters {c:?}"));
            }
        }
        if let StopDelta::Value(d) = self.stop_delta {
            if !(d >= 0.0) {
                return invalid(format!("stop delta must be >= 0, got {d}"));
            }
        }
        if let LambdaMode::Explicit { row, col } = self.lambda_mode {
            if !(row >= 0.0 && col >= 0.0) {
                return invalid(format!(
                    "regularizer weights must be >= 0, got ({row}, {col})"
                ));
            }
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if self.log_every == 0 {
            return invalid("log_every must be at least 1");
        }
        Ok(())
    }

    pub fn resolve_lambda(&self, y_obs: &[f64], m: usize, n: usize) -> Result<(f64, f64)> {
        match self.lambda_mode {
            LambdaMode::Auto => auto_lambda(y_obs, m, n),
            LambdaMode::Explicit { row, col } => Ok((row, col)),
        }
    }
}

/// Factor chain plus row and column regularizer parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub chain: FactorChain,
    pub reg_row: RegParam,
    pub reg_col: RegParam,
    /// When false the Laplacians stay at their initial values.
    pub adaptive: bool,
}

impl ModelState {
    pub fn new(
        chain: FactorChain,
        reg_row: RegParam,
        reg_col: RegParam,
        adaptive: bool,
    ) -> Result<Self> {
        let (m, n) = chain.shape();
        if reg_row.dim() != m || reg_col.dim() != n {
            return invalid(format!(
                "regularizer sizes ({}, {}) do not match a {m}x{n} model",
                reg_row.dim(),
                reg_col.dim()
            ));
        }
        Ok(Self {
            chain,
            reg_row,
            reg_col,
            adaptive,
        })
    }

    /// Adaptive state with `N(0, variance)` regularizer parameters.
    pub fn with_gaussian_reg(
        chain: FactorChain,
        form: Parameterization,
        variance: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let (m, n) = chain.shape();
        let reg_row = RegParam::gaussian(rng, m, variance, form)?;
        let reg_col = RegParam::gaussian(rng, n, variance, form)?;
        Self::new(chain, reg_row, reg_col, true)
    }

    pub fn laplacians(&self) -> Result<(LaplacianPair, LaplacianPair)> {
        Ok((
            build_laplacian(&self.reg_row)?,
            build_laplacian(&self.reg_col)?,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Losses {
    pub total: f64,
    pub fidelity: f64,
    /// `tr(XᵀLrX)`, unweighted.
    pub reg_row: f64,
    /// `tr(X Lc Xᵀ)`, unweighted.
    pub reg_col: f64,
}

pub fn total_loss(
    state: &ModelState,
    mask: &SamplingMask,
    y_obs: &[f64],
    lambda_r: f64,
    lambda_c: f64,
) -> Result<Losses> {
    let x = state.chain.forward();
    let r = residual(&x, mask, y_obs)?;
    let (lr, lc) = state.laplacians()?;
    let fidelity = 0.5 * r.inner(&r);
    let reg_row = dirichlet_energy(&lr.l, &x)?;
    let reg_col = dirichlet_energy(&lc.l, &x.transpose())?;
    Ok(Losses {
        total: fidelity + lambda_r * reg_row + lambda_c * reg_col,
        fidelity,
        reg_row,
        reg_col,
    })
}

/// Which penalty is added to the fidelity term.
#[derive(Clone, Debug, PartialEq)]
pub enum Penalty {
    /// Plain factorization.
    None,
    /// Laplacians built from the state's regularizer parameters.
    Learned,
    /// Externally supplied Laplacians, never updated.
    Fixed { lr: Matrix, lc: Matrix },
    /// Smoothed total variation; `reg_row` in the trace holds its value.
    Tv(TvConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    RegularizerConverged,
    TargetReached,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::RegularizerConverged => "regularizer_converged",
            StopReason::TargetReached => "target_reached",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub trace: MetricTrace,
    pub iters: usize,
    pub stop: StopReason,
}

/// Clamp applied to regularizer parameters after each update so that the
/// adjacency exponentials stay finite.
fn clamp_limit(form: Parameterization) -> f64 {
    match form {
        Parameterization::Product => 350.0,
        Parameterization::Sum => 700.0,
    }
}

struct Eval {
    x: Matrix,
    grad_x: Matrix,
    losses: Losses,
    pairs: Option<(LaplacianPair, LaplacianPair)>,
}

/// Step-by-step driver. [`train`] runs it to completion; use it directly to
/// inspect the state between updates or to keep the trace after a failure.
pub struct Trainer<'a> {
    state: ModelState,
    penalty: Penalty,
    mask: &'a SamplingMask,
    y_obs: &'a [f64],
    truth: Option<&'a GroundTruth>,
    cfg: TrainConfig,
    lambda: (f64, f64),
    delta: f64,
    adam: Option<AdamMoments>,
    iter: usize,
    trace: MetricTrace,
    prev_reg: Option<(f64, f64)>,
    clamp_warned: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(
        state: ModelState,
        penalty: Penalty,
        mask: &'a SamplingMask,
        y_obs: &'a [f64],
        cfg: TrainConfig,
        truth: Option<&'a GroundTruth>,
    ) -> Result<Self> {
        cfg.validate()?;
        let (m, n) = state.chain.shape();
        if mask.shape() != (m, n) {
            return invalid(format!(
                "mask is {:?} but the model is {m}x{n}",
                mask.shape()
            ));
        }
        if y_obs.len() != mask.observed_count() {
            return invalid(format!(
                "{} observations for {} observed entries",
                y_obs.len(),
                mask.observed_count()
            ));
        }
        if let Some(t) = truth {
            if t.full.shape() != (m, n) {
                return invalid(format!(
                    "ground truth is {:?}, model is {m}x{n}",
                    t.full.shape()
                ));
            }
        }
        match &penalty {
            Penalty::Fixed { lr, lc } if lr.shape() != (m, m) || lc.shape() != (n, n) => {
                return invalid(format!(
                    "fixed Laplacians {:?} and {:?} do not fit a {m}x{n} model",
                    lr.shape(),
                    lc.shape()
                ));
            }
            Penalty::Tv(tv) => tv.validate()?,
            _ => {}
        }
        let lambda = match &penalty {
            Penalty::None => (0.0, 0.0),
            Penalty::Tv(tv) => (tv.weight, 0.0),
            _ => cfg.resolve_lambda(y_obs, m, n)?,
        };
        let delta = match cfg.stop_delta {
            StopDelta::Auto => (m * n) as f64 / 1000.0,
            StopDelta::Value(d) => d,
        };
        let mut trainer = Self {
            trace: MetricTrace::new(cfg.track_singular_values),
            state,
            penalty,
            mask,
            y_obs,
            truth,
            cfg,
            lambda,
            delta,
            adam: None,
            iter: 0,
            prev_reg: None,
            clamp_warned: false,
        };
        if let Optimizer::Adam(_) = trainer.cfg.optimizer {
            trainer.adam = Some(AdamMoments::zeros_like(
                trainer.params_mut().into_iter().map(|p| &*p),
            ));
        }
        Ok(trainer)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn trace(&self) -> &MetricTrace {
        &self.trace
    }

    /// Updates applied so far.
    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn lambda(&self) -> (f64, f64) {
        self.lambda
    }

    pub fn into_parts(self) -> (ModelState, MetricTrace) {
        (self.state, self.trace)
    }

    fn learns_reg(&self) -> bool {
        matches!(self.penalty, Penalty::Learned) && self.state.adaptive
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let learns = self.learns_reg();
        let ModelState {
            chain,
            reg_row,
            reg_col,
            ..
        } = &mut self.state;
        let mut params: Vec<&mut Matrix> = chain.factors_mut().iter_mut().collect();
        if learns {
            params.push(&mut reg_row.w);
            params.push(&mut reg_col.w);
        }
        params
    }

    fn evaluate(&self) -> Result<Eval> {
        let x = self.state.chain.forward();
        let r = residual(&x, self.mask, self.y_obs)?;
        let fidelity = 0.5 * r.inner(&r);
        let (lam_r, lam_c) = self.lambda;
        let mut grad_x = r;
        let (mut reg_row, mut reg_col) = (0.0, 0.0);
        let mut pairs = None;
        match &self.penalty {
            Penalty::None => {}
            Penalty::Learned => {
                let (pr, pc) = self.state.laplacians()?;
                let xt = x.transpose();
                reg_row = dirichlet_energy(&pr.l, &x)?;
                reg_col = dirichlet_energy(&pc.l, &xt)?;
                add_laplacian_grad(&mut grad_x, &pr.l, &pc.l, &x, lam_r, lam_c);
                pairs = Some((pr, pc));
            }
            Penalty::Fixed { lr, lc } => {
                reg_row = dirichlet_energy(lr, &x)?;
                reg_col = dirichlet_energy(lc, &x.transpose())?;
                add_laplacian_grad(&mut grad_x, lr, lc, &x, lam_r, lam_c);
            }
            Penalty::Tv(tv) => {
                let (v, g) = tv_value_and_grad(&x, tv.eps);
                reg_row = v;
                if lam_r != 0.0 {
                    grad_x.axpy(lam_r, &g);
                }
            }
        }
        let total = fidelity + lam_r * reg_row + lam_c * reg_col;
        if !total.is_finite() {
            return Err(Error::Divergence {
                iter: self.iter,
                message: format!("objective is {total}"),
            });
        }
        Ok(Eval {
            x,
            grad_x,
            losses: Losses {
                total,
                fidelity,
                reg_row,
                reg_col,
            },
            pairs,
        })
    }

    fn record(&mut self, e: &Eval) -> Result<()> {
        let n_obs = self.y_obs.len() as f64;
        let mut row = MetricRow {
            iter: self.iter,
            total: e.losses.total,
            fidelity: e.losses.fidelity,
            reg_row: e.losses.reg_row,
            reg_col: e.losses.reg_col,
            mse_obs: 2.0 * e.losses.fidelity / n_obs,
            mse_unobs: None,
            nmae: None,
            sigma: Vec::new(),
        };
        if let Some(t) = self.truth {
            if self.mask.unobserved_count() > 0 {
                let m = metrics(&e.x, t, self.mask, self.cfg.nmae_kind)?;
                row.mse_unobs = Some(m.mse_unobs);
                row.nmae = Some(m.nmae);
            }
        }
        if self.trace.sigma_count > 0 {
            let mut s = singular_values(&e.x)?;
            s.truncate(self.trace.sigma_count);
            row.sigma = s;
        }
        self.trace.rows.push(row);
        Ok(())
    }

    fn apply_update(&mut self, e: Eval) -> Result<()> {
        let mut grads = self.state.chain.chain_grad(&e.grad_x);
        if self.learns_reg() {
            let (pr, pc) = e
                .pairs
                .as_ref()
                .expect("learned penalty evaluates Laplacians");
            let (lam_r, lam_c) = self.lambda;
            grads.push(grad_from_pair(self.state.reg_row.form, pr, &e.x).scale(lam_r));
            grads.push(grad_from_pair(self.state.reg_col.form, pc, &e.x.transpose()).scale(lam_c));
        }
        self.iter += 1;
        let t = self.iter;
        let optimizer = self.cfg.optimizer;
        let mut adam = self.adam.take();
        {
            let mut params = self.params_mut();
            match (&optimizer, adam.as_mut()) {
                (Optimizer::Gd { lr }, _) => {
                    for (p, g) in params.iter_mut().zip(&grads) {
                        p.axpy(-lr, g);
                    }
                }
                (Optimizer::Adam(c), Some(mom)) => adam_step(&mut params, &grads, mom, t, c),
                (Optimizer::Adam(_), None) => {
                    unreachable!("Adam moments are created with the trainer")
                }
            }
        }
        self.adam = adam;
        if self.learns_reg() {
            self.clamp_reg();
        }
        let finite = self.state.chain.factors().iter().all(Matrix::is_finite)
            && self.state.reg_row.w.is_finite()
            && self.state.reg_col.w.is_finite();
        if !finite {
            return Err(Error::Divergence {
                iter: t,
                message: "parameters became non-finite".into(),
            });
        }
        Ok(())
    }

    fn clamp_reg(&mut self) {
        let mut clamped = false;
        for p in [&mut self.state.reg_row, &mut self.state.reg_col] {
            let lim = clamp_limit(p.form);
            for x in p.w.as_mut_slice() {
                if x.abs() > lim {
                    *x = x.clamp(-lim, lim);
                    clamped = true;
                }
            }
        }
        if clamped && !self.clamp_warned {
            log::warn!(
                "iteration {}: regularizer parameters clamped to keep exp finite",
                self.iter
            );
            self.clamp_warned = true;
        }
    }

    /// One update. Returns the stop reason instead of updating when a
    /// stopping rule fires at the current iterate.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        let e = self.evaluate()?;
        let logged = self.iter % self.cfg.log_every == 0;
        if logged {
            self.record(&e)?;
        }
        let stop = self.stop_reason(&e);
        self.prev_reg = Some((e.losses.reg_row, e.losses.reg_col));
        if let Some(reason) = stop {
            if !logged {
                self.record(&e)?;
            }
            return Ok(Some(reason));
        }
        self.apply_update(e)?;
        Ok(None)
    }

    fn stop_reason(&self, e: &Eval) -> Option<StopReason> {
        if let Some(target) = self.cfg.target_obs_mse {
            if 2.0 * e.losses.fidelity / (self.y_obs.len() as f64) < target {
                return Some(StopReason::TargetReached);
            }
        }
        let (lam_r, lam_c) = self.lambda;
        let has_reg = !matches!(self.penalty, Penalty::None) && (lam_r != 0.0 || lam_c != 0.0);
        if has_reg && self.iter >= self.cfg.warmup {
            if let Some((pr, pc)) = self.prev_reg {
                let (wr, wc) = if self.cfg.delta_on_weighted {
                    (lam_r, lam_c)
                } else {
                    (1.0, 1.0)
                };
                let dr = (wr * (e.losses.reg_row - pr)).abs();
                let dc = (wc * (e.losses.reg_col - pc)).abs();
                if dr < self.delta && dc < self.delta {
                    return Some(StopReason::RegularizerConverged);
                }
            }
        }
        if self.iter >= self.cfg.max_iters {
            return Some(StopReason::MaxIters);
        }
        None
    }

    pub fn run(&mut self) -> Result<StopReason> {
        loop {
            if let Some(reason) = self.step()? {
                return Ok(reason);
            }
        }
    }
}

fn add_laplacian_grad(
    g: &mut Matrix,
    lr: &Matrix,
    lc: &Matrix,
    x: &Matrix,
    lam_r: f64,
    lam_c: f64,
) {
    if lam_r != 0.0 {
        g.axpy(2.0 * lam_r, &lr.matmul(x));
    }
    if lam_c != 0.0 {
        g.axpy(2.0 * lam_c, &x.matmul(lc));
    }
}

pub fn train_with(
    state: ModelState,
    penalty: Penalty,
    mask: &SamplingMask,
    y_obs: &[f64],
    cfg: &TrainConfig,
    truth: Option<&GroundTruth>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(state, penalty, mask, y_obs, cfg.clone(), truth)?;
    let stop = trainer.run()?;
    let iters = trainer.iter();
    let (state, trace) = trainer.into_parts();
    Ok(TrainOutcome {
        state,
        trace,
        iters,
        stop,
    })
}

/// Trains with the learned Laplacian penalty.
pub fn train(
    state: ModelState,
    mask: &SamplingMask,
    y_obs: &[f64],
    cfg: &TrainConfig,
    truth: Option<&GroundTruth>,
) -> Result<TrainOutcome> {
    train_with(state, Penalty::Learned, mask, y_obs, cfg, truth)
}

/// Observed entries of `y` under `mask`, row-major.
pub fn observations(y: &Matrix, mask: &SamplingMask) -> Result<Vec<f64>> {
    apply_mask(y, mask, Which::Observed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_lowrank;
    use crate::dmf::{initialize, InitScheme};

    fn setup(seed: u64) -> (ModelState, SamplingMask, Vec<f64>, GroundTruth) {
        let mut rng = SeededRng::new(seed);
        let truth = gen_lowrank(&mut rng, 6, 5, 2).unwrap();
        let mask = SamplingMask::from_fn(6, 5, |i, j| (i + 2 * j) % 4 != 0).unwrap();
        let y = observations(&truth.full, &mask).unwrap();
        let chain =
            initialize(6, 5, 3, 5, InitScheme::Gaussian { variance: 0.1 }, &mut rng).unwrap();
        let state =
            ModelState::with_gaussian_reg(chain, Parameterization::Product, 0.5, &mut rng).unwrap();
        (state, mask, y, truth)
    }

    #[test]
    fn total_loss_is_sum_of_parts() {
        let (state, mask, y, _) = setup(1);
        let l = total_loss(&state, &mask, &y, 0.3, 0.7).unwrap();
        let x = state.chain.forward();
        let mut fid = 0.0;
        let mut k = 0;
        for i in 0..6 {
            for j in 0..5 {
                if mask.is_observed(i, j) {
                    fid += 0.5 * (x[(i, j)] - y[k]).powi(2);
                    k += 1;
                }
            }
        }
        let lr = build_laplacian(&state.reg_row).unwrap().l;
        let lc = build_laplacian(&state.reg_col).unwrap().l;
        let rr = x.transpose().matmul(&lr).matmul(&x).trace();
        let rc = x.matmul(&lc).matmul(&x.transpose()).trace();
        assert!((l.fidelity - fid).abs() < 1e-12);
        assert!((l.reg_row - rr).abs() < 1e-12 * rr.abs().max(1.0));
        assert!((l.reg_col - rc).abs() < 1e-12 * rc.abs().max(1.0));
        assert!((l.total - (fid + 0.3 * rr + 0.7 * rc)).abs() < 1e-12 * l.total.abs().max(1.0));
        let plain = total_loss(&state, &mask, &y, 0.0, 0.0).unwrap();
        assert_eq!(plain.total, plain.fidelity);
    }

    #[test]
    fn constant_matrix_has_zero_penalty() {
        let chain =
            FactorChain::new(vec![Matrix::filled(1, 3, 1.0), Matrix::filled(4, 1, 2.0)]).unwrap();
        let mut rng = SeededRng::new(0);
        let state =
            ModelState::with_gaussian_reg(chain, Parameterization::Product, 1.0, &mut rng).unwrap();
        let mask = SamplingMask::full(4, 3);
        let l = total_loss(&state, &mask, &[2.0; 12], 1.0, 1.0).unwrap();
        assert!(l.reg_row.abs() < 1e-12 && l.reg_col.abs() < 1e-12);
    }

    #[test]
    fn gd_fits_a_fully_observed_matrix() {
        let y = Matrix::from_rows(&[[1.0, 0.5], [0.2, 0.8]]);
        let mask = SamplingMask::full(2, 2);
        let obs = observations(&y, &mask).unwrap();
        let mut rng = SeededRng::new(3);
        let chain =
            initialize(2, 2, 2, 2, InitScheme::Gaussian { variance: 0.1 }, &mut rng).unwrap();
        let state = ModelState::with_gaussian_reg(chain, Parameterization::Product, 1e-5, &mut rng)
            .unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Gd { lr: 0.01 },
            max_iters: 5000,
            lambda_mode: LambdaMode::Explicit { row: 0.0, col: 0.0 },
            ..TrainConfig::default()
        };
        let out = train(state, &mask, &obs, &cfg, None).unwrap();
        assert_eq!(out.stop, StopReason::MaxIters);
        assert!(out.trace.last().unwrap().fidelity < 1e-6);
    }

    #[test]
    fn zero_laplacians_reproduce_plain_factorization() {
        let (state, mask, y, truth) = setup(2);
        let cfg = TrainConfig {
            max_iters: 200,
            ..TrainConfig::default()
        };
        let (m, n) = state.chain.shape();
        let fixed = Penalty::Fixed {
            lr: Matrix::zeros(m, m),
            lc: Matrix::zeros(n, n),
        };
        let a = train_with(state.clone(), fixed, &mask, &y, &cfg, Some(&truth)).unwrap();
        let b = train_with(state, Penalty::None, &mask, &y, &cfg, Some(&truth)).unwrap();
        assert_eq!(a.state.chain, b.state.chain);
    }

    #[test]
    fn adaptive_energies_shrink() {
        let (state, mask, y, truth) = setup(4);
        let initial = state.clone();
        let cfg = TrainConfig {
            max_iters: 300,
            lambda_mode: LambdaMode::Explicit { row: 0.1, col: 0.1 },
            stop_delta: StopDelta::Value(0.0),
            log_every: 1,
            ..TrainConfig::default()
        };
        let out = train(state, &mask, &y, &cfg, Some(&truth)).unwrap();
        assert!(out
            .trace
            .rows
            .iter()
            .all(|r| r.reg_row >= 0.0 && r.reg_col >= 0.0));
        // The energy grows while X fits the data, so compare the learned
        // Laplacians against the initial ones on the final estimate.
        let x = out.state.chain.forward();
        let (l0r, l0c) = initial.laplacians().unwrap();
        let (l1r, l1c) = out.state.laplacians().unwrap();
        assert!(dirichlet_energy(&l1r.l, &x).unwrap() < dirichlet_energy(&l0r.l, &x).unwrap());
        let xt = x.transpose();
        assert!(dirichlet_energy(&l1c.l, &xt).unwrap() < dirichlet_energy(&l0c.l, &xt).unwrap());
    }

    #[test]
    fn stopping_rules() {
        let (state, mask, y, truth) = setup(5);
        let cfg = TrainConfig {
            max_iters: 2000,
            lambda_mode: LambdaMode::Explicit {
                row: 1e-3,
                col: 1e-3,
            },
            ..TrainConfig::default()
        };
        // δ = 30/1000 on weighted deltas that are far smaller: stops right after warm-up.
        let out = train(state.clone(), &mask, &y, &cfg, Some(&truth)).unwrap();
        assert_eq!(
            (out.stop, out.iters),
            (StopReason::RegularizerConverged, 500)
        );
        let cfg = TrainConfig {
            target_obs_mse: Some(f64::INFINITY),
            ..cfg
        };
        let out = train(state, &mask, &y, &cfg, None).unwrap();
        assert_eq!((out.stop, out.iters), (StopReason::TargetReached, 0));
        assert_eq!(out.trace.rows.len(), 1);
    }

    #[test]
    fn divergence_is_reported() {
        let (state, mask, y, _) = setup(6);
        let cfg = TrainConfig {
            optimizer: Optimizer::Gd { lr: 1e6 },
            max_iters: 100,
            ..TrainConfig::default()
        };
        let err = train_with(state, Penalty::None, &mask, &y, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn invalid_configs() {
        let (state, mask, y, _) = setup(7);
        for cfg in [
            TrainConfig {
                optimizer: Optimizer::Gd { lr: 0.0 },
                ..TrainConfig::default()
            },
            TrainConfig {
                max_iters: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                stop_delta: StopDelta::Value(-1.0),
                ..TrainConfig::default()
            },
        ] {
            assert!(train(state.clone(), &mask, &y, &cfg, None).is_err());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let (state, mask, y, truth) = setup(8);
            let cfg = TrainConfig {
                max_iters: 50,
                log_every: 5,
                track_singular_values: 2,
                ..TrainConfig::default()
            };
            train(state, &mask, &y, &cfg, Some(&truth))
                .unwrap()
                .trace
                .to_csv()
        };
        assert_eq!(run(), run());
    }
}
