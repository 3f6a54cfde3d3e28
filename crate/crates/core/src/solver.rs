//! l0-regularized maximum-correntropy adaptive filters for sparse recovery.
//!
//! Three update rules share one state type:
//!
//! * [`l0_mcc_step`]: one measurement row per update, residual weighted by the
//!   Gaussian kernel `exp(-e^2 / 2 sigma^2)`;
//! * [`mb_l0_mcc_step`]: a random mini-batch of rows per update, each residual
//!   weighted by its own kernel value;
//! * [`l0_lms_step`]: the kernel-free limit (`sigma -> inf`).
//!
//! All of them add the zero-attraction term `mu * lambda * z_beta(w)`, with
//! `z_beta` evaluated on the weights *before* the gradient update.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{estimate_sigma_max, gaussian_kernel, KernelSchedule, DEFAULT_SIGMA_MIN};
use crate::problem::{dot, recursive_index, ReconstructionProblem};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    L0Mcc,
    MbL0Mcc,
    L0Lms,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::L0Mcc => "l0_mcc",
            Variant::MbL0Mcc => "mb_l0_mcc",
            Variant::L0Lms => "l0_lms",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Mini-batch size, either absolute or as a fraction of the row count `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    Fixed(usize),
    FractionOfRows(f64),
}

impl BatchSize {
    pub fn resolve(self, m: usize) -> usize {
        match self {
            BatchSize::Fixed(s) => s,
            BatchSize::FractionOfRows(f) => ((f * m as f64).round() as usize).max(1),
        }
    }
}

/// Per-residual weighting inside a mini-batch update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Gaussian kernel of the residual at the current width.
    Correntropy,
    /// Unit weight (the kernel-free limit).
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub sigma_min: f64,
    pub theta: f64,
    /// Fixed initial kernel width; estimated from the measurements when absent.
    pub sigma_max: Option<f64>,
    /// Maximum number of weight updates `C`.
    pub max_updates: usize,
    /// Stop once `||w(i) - w(i - window)||^2 < epsilon`, checked every
    /// `window` updates. Zero disables the check.
    pub epsilon: f64,
    pub batch: BatchSize,
    pub with_replacement: bool,
    /// Updates spanned by one convergence check. Defaults to ten passes over
    /// the data: `10 M` for the single-row variants, `10 ceil(M / S)` for the
    /// mini-batch variant. A window of 1 compares consecutive iterates.
    pub window: Option<usize>,
    /// Trace sampling stride in updates; defaults to `max(1, C / 2000)`.
    pub trace_stride: Option<usize>,
}

impl SolverConfig {
    /// Step size 0.2, beta 10, theta 20, epsilon 1e-4, sigma_min 0.03 and
    /// batch 0.1 M. The single-row variants use lambda 5e-6 and `C` = 1e5;
    /// the mini-batch variant uses lambda 1e-4 and `C` = 1e4.
    pub fn recommended(variant: Variant) -> Self {
        let (lambda, max_updates) = match variant {
            Variant::L0Mcc | Variant::L0Lms => (5e-6, 100_000),
            Variant::MbL0Mcc => (1e-4, 10_000),
        };
        Self {
            variant,
            mu: 0.2,
            lambda,
            beta: 10.0,
            sigma_min: DEFAULT_SIGMA_MIN,
            theta: 20.0,
            sigma_max: None,
            max_updates,
            epsilon: 1e-4,
            batch: BatchSize::FractionOfRows(0.1),
            with_replacement: true,
            window: None,
            trace_stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::param(format!("step size mu must be positive, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.sigma_min > 0.0) {
            return Err(Error::param(format!("sigma_min must be positive, got {}", self.sigma_min)));
        }
        if let Some(s) = self.sigma_max {
            if !(s > 0.0) {
                return Err(Error::param(format!("sigma_max must be positive, got {s}")));
            }
        }
        if !(self.theta >= 0.0) {
            return Err(Error::param(format!("theta must be >= 0, got {}", self.theta)));
        }
        if self.max_updates == 0 {
            return Err(Error::param("max_updates must be at least 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.window == Some(0) || self.trace_stride == Some(0) {
            return Err(Error::param("window and trace_stride must be at least 1"));
        }
        match self.batch {
            BatchSize::Fixed(0) => return Err(Error::param("batch size must be at least 1")),
            BatchSize::FractionOfRows(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(Error::param(format!("batch fraction must lie in (0, 1], got {f}")))
            }
            _ => {}
        }
        Ok(())
    }

    /// Validates against a problem with `m` rows and returns the batch size.
    pub fn validate_for(&self, m: usize) -> Result<usize> {
        self.validate()?;
        let s = self.batch.resolve(m);
        if self.variant == Variant::MbL0Mcc && s > m {
            return Err(Error::param(format!("batch size S={s} exceeds measurement count M={m}")));
        }
        Ok(s)
    }

    pub fn window_for(&self, m: usize) -> usize {
        self.window.unwrap_or(match self.variant {
            Variant::MbL0Mcc => 10 * m.div_ceil(self.batch.resolve(m).max(1)),
            Variant::L0Mcc | Variant::L0Lms => 10 * m,
        })
    }

    pub fn trace_stride(&self) -> usize {
        self.trace_stride.unwrap_or((self.max_updates / 2000).max(1))
    }

    /// Kernel schedule for measurements `y`, estimating `sigma_max` if unset.
    pub fn schedule_for(&self, y: &[f64]) -> Result<KernelSchedule> {
        let sigma_max = match self.sigma_max {
            Some(s) => s,
            None => estimate_sigma_max(y, self.sigma_min)?,
        };
        KernelSchedule::new(sigma_max, self.sigma_min, self.theta, self.max_updates)
    }
}

/// Mutable estimate carried across updates.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub w: Vec<f64>,
    /// Number of updates applied so far.
    pub i: usize,
    pub sigma_now: f64,
    pub last_delta_sq: f64,
    pub w_norm_sq: f64,
    grad: Vec<f64>,
}

impl SolverState {
    /// Zero weights.
    pub fn new(n: usize, sigma: f64) -> Self {
        Self::from_weights(vec![0.0; n], sigma)
    }

    pub fn from_weights(w: Vec<f64>, sigma: f64) -> Self {
        let w_norm_sq = dot(&w, &w);
        let n = w.len();
        Self {
            w,
            i: 0,
            sigma_now: sigma,
            last_delta_sq: 0.0,
            w_norm_sq,
            grad: vec![0.0; n],
        }
    }
}

/// Piecewise-linear zero attractor for one coefficient.
#[inline]
pub fn zero_attraction_scalar(w: f64, beta: f64) -> f64 {
    let r = 1.0 / beta;
    if w < 0.0 && w >= -r {
        beta * beta * w + beta
    } else if w > 0.0 && w <= r {
        beta * beta * w - beta
    } else {
        0.0
    }
}

pub fn zero_attraction(w: &[f64], beta: f64) -> Vec<f64> {
    w.iter().map(|&wm| zero_attraction_scalar(wm, beta)).collect()
}

/// `w <- w + mu * grad(m) + mu * lambda * z_beta(w)` with `z_beta` on the old `w`.
#[inline]
fn apply_update<F: Fn(usize) -> f64>(state: &mut SolverState, cfg: &SolverConfig, grad: F) -> Result<()> {
    let (mu, mu_lambda, beta) = (cfg.mu, cfg.mu * cfg.lambda, cfg.beta);
    let mut delta_sq = 0.0;
    let mut norm_sq = 0.0;
    for (m, wm) in state.w.iter_mut().enumerate() {
        let old = *wm;
        let new = old + mu * grad(m) + mu_lambda * zero_attraction_scalar(old, beta);
        *wm = new;
        let d = new - old;
        delta_sq += d * d;
        norm_sq += new * new;
    }
    state.i += 1;
    state.last_delta_sq = delta_sq;
    state.w_norm_sq = norm_sq;
    if !norm_sq.is_finite() || !delta_sq.is_finite() {
        return Err(Error::Divergence {
            iteration: state.i,
            reason: "non-finite weights".into(),
        });
    }
    Ok(())
}

fn check_row(state: &SolverState, row: &[f64]) -> Result<()> {
    if row.len() != state.w.len() {
        return Err(Error::dim(format!(
            "row length {} does not match weight length {}",
            row.len(),
            state.w.len()
        )));
    }
    Ok(())
}

fn residual(state: &SolverState, row: &[f64], y_i: f64) -> Result<f64> {
    let e = y_i - dot(&state.w, row);
    if !e.is_finite() {
        return Err(Error::Divergence {
            iteration: state.i,
            reason: format!("non-finite residual {e}"),
        });
    }
    Ok(e)
}

/// One l0-MCC update on a single measurement `(row, y_i)` at width `state.sigma_now`.
pub fn l0_mcc_step(state: &mut SolverState, row: &[f64], y_i: f64, cfg: &SolverConfig) -> Result<()> {
    check_row(state, row)?;
    if !(state.sigma_now > 0.0) {
        return Err(Error::param(format!("kernel width must be positive, got {}", state.sigma_now)));
    }
    let e = residual(state, row, y_i)?;
    let ge = gaussian_kernel(e, state.sigma_now) * e;
    apply_update(state, cfg, |m| ge * row[m])
}

/// One l0-LMS update: [`l0_mcc_step`] with the kernel factor fixed at 1.
pub fn l0_lms_step(state: &mut SolverState, row: &[f64], y_i: f64, cfg: &SolverConfig) -> Result<()> {
    check_row(state, row)?;
    let e = residual(state, row, y_i)?;
    apply_update(state, cfg, |m| e * row[m])
}

/// Mini-batch update over the given zero-based row indices.
pub fn mb_step_with_indices(
    state: &mut SolverState,
    problem: &ReconstructionProblem,
    indices: &[usize],
    cfg: &SolverConfig,
    weighting: Weighting,
) -> Result<()> {
    if state.w.len() != problem.n() {
        return Err(Error::dim("weight length does not match problem dimension"));
    }
    if let Some(&bad) = indices.iter().find(|&&k| k >= problem.m()) {
        return Err(Error::dim(format!("row index {bad} out of range for M={}", problem.m())));
    }
    if weighting == Weighting::Correntropy && !(state.sigma_now > 0.0) {
        return Err(Error::param(format!("kernel width must be positive, got {}", state.sigma_now)));
    }
    // Residuals all use the pre-update weights.
    let mut grad = std::mem::take(&mut state.grad);
    grad.iter_mut().for_each(|g| *g = 0.0);
    for &k in indices {
        let row = problem.phi.row(k);
        let e = match residual(state, row, problem.y[k]) {
            Ok(e) => e,
            Err(err) => {
                state.grad = grad;
                return Err(err);
            }
        };
        let ge = match weighting {
            Weighting::Correntropy => gaussian_kernel(e, state.sigma_now) * e,
            Weighting::Unit => e,
        };
        grad.iter_mut().zip(row).for_each(|(g, p)| *g += ge * p);
    }
    let out = apply_update(state, cfg, |m| grad[m]);
    state.grad = grad;
    out
}

/// Draws mini-batch row indices (zero-based).
pub fn draw_batch<R: Rng + ?Sized>(rng: &mut R, m: usize, s: usize, with_replacement: bool) -> Vec<usize> {
    if with_replacement {
        (0..s).map(|_| rng.random_range(0..m)).collect()
    } else {
        index::sample(rng, m, s).into_vec()
    }
}

/// One MB-l0-MCC update with a freshly drawn batch.
pub fn mb_l0_mcc_step<R: Rng + ?Sized>(
    state: &mut SolverState,
    problem: &ReconstructionProblem,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<()> {
    let s = cfg.validate_for(problem.m())?;
    let idx = draw_batch(rng, problem.m(), s, cfg.with_replacement);
    mb_step_with_indices(state, problem, &idx, cfg, Weighting::Correntropy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Number of updates applied when the sample was taken.
    pub iteration: usize,
    /// `||w - x||^2`, present when the ground truth is known.
    pub squared_deviation: Option<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Converged { epsilon: f64 },
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub points: Vec<TracePoint>,
    pub termination: Termination,
    pub updates_used: usize,
    /// Updates spanned by each convergence check.
    pub window: usize,
    pub sigma_max: f64,
}

impl RunTrace {
    /// First sampled iteration whose squared deviation is below `threshold`.
    /// Exact when the trace stride is 1.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.squared_deviation.is_some_and(|d| d < threshold))
            .map(|p| p.iteration)
    }

    pub fn final_squared_deviation(&self) -> Option<f64> {
        self.points.last().and_then(|p| p.squared_deviation)
    }

    /// CSV rows `iteration,squared_deviation,sigma` (deviation empty without truth).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iteration", "squared_deviation", "sigma"])
            .map_err(|e| Error::Format(e.to_string()))?;
        for p in &self.points {
            wtr.write_record([
                p.iteration.to_string(),
                p.squared_deviation.map(|d| d.to_string()).unwrap_or_default(),
                p.sigma.to_string(),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub w: Vec<f64>,
    pub trace: RunTrace,
}

fn squared_deviation(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Runs the configured variant from `w = 0` until the displacement over one
/// convergence window drops below `epsilon` or `max_updates` is reached. `seed` drives
/// mini-batch selection and is ignored by the single-row variants.
pub fn run(problem: &ReconstructionProblem, cfg: &SolverConfig, seed: u64) -> Result<RunOutcome> {
    let m = problem.m();
    let batch = cfg.validate_for(m)?;
    let schedule = cfg.schedule_for(&problem.y)?;
    let window = cfg.window_for(m);
    let stride = cfg.trace_stride();
    let truth = problem.truth.as_ref().map(|x| x.values());

    let y_norm_sq = dot(&problem.y, &problem.y);
    let blowup = 1e6 * (y_norm_sq / problem.phi.entry_variance()).max(1.0);

    let mut rng = stream(seed);
    let mut idx = Vec::with_capacity(batch);
    let mut state = SolverState::new(problem.n(), schedule.sigma_at(0));
    let sample = |state: &SolverState| TracePoint {
        iteration: state.i,
        squared_deviation: truth.map(|x| squared_deviation(&state.w, x)),
        sigma: state.sigma_now,
    };
    let mut points = vec![sample(&state)];
    let mut anchor = state.w.clone();
    let mut termination = Termination::MaxIterations;

    for i in 0..cfg.max_updates {
        state.sigma_now = schedule.sigma_at(i);
        match cfg.variant {
            Variant::L0Mcc => {
                let k = recursive_index(i, m) - 1;
                l0_mcc_step(&mut state, problem.phi.row(k), problem.y[k], cfg)?;
            }
            Variant::L0Lms => {
                let k = recursive_index(i, m) - 1;
                l0_lms_step(&mut state, problem.phi.row(k), problem.y[k], cfg)?;
            }
            Variant::MbL0Mcc => {
                idx.clear();
                if cfg.with_replacement {
                    idx.extend((0..batch).map(|_| rng.random_range(0..m)));
                } else {
                    idx.extend(index::sample(&mut rng, m, batch));
                }
                mb_step_with_indices(&mut state, problem, &idx, cfg, Weighting::Correntropy)?;
            }
        }
        if state.w_norm_sq > blowup {
            return Err(Error::Divergence {
                iteration: state.i,
                reason: format!("||w||^2 = {:.3e} exceeds limit {blowup:.3e}", state.w_norm_sq),
            });
        }
        let stop = if state.i.is_multiple_of(window) {
            let moved = if window == 1 {
                state.last_delta_sq
            } else {
                squared_deviation(&state.w, &anchor)
            };
            anchor.copy_from_slice(&state.w);
            moved < cfg.epsilon
        } else {
            false
        };
        if stop || state.i.is_multiple_of(stride) {
            points.push(sample(&state));
        }
        if stop {
            termination = Termination::Converged { epsilon: cfg.epsilon };
            break;
        }
    }
    if points.last().map(|p| p.iteration) != Some(state.i) {
        points.push(sample(&state));
    }

    Ok(RunOutcome {
        w: state.w,
        trace: RunTrace {
            points,
            termination,
            updates_used: state.i,
            window,
            sigma_max: schedule.sigma_max,
        },
    })
}
