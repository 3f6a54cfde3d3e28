//! Monte Carlo trials, parameter sweeps and averaged learning curves.
//!
//! Trial `t` at axis point `a` draws everything from
//! `derive_seed(master_seed, [a, t])`: signal, matrix and noise each get their
//! own sub-stream, so any single trial can be replayed in isolation. Every
//! configured solver runs on the same problem instance, which makes
//! comparisons between variants paired.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{sample_noise, NoiseModel};
use crate::problem::{measure, MatrixKind, NonzeroDist, ReconstructionProblem, SensingMatrix, SparseSignal};
use crate::rng::{derive_seed, purpose_seed, Purpose};
use crate::solver::{run, RunTrace, SolverConfig, Termination, Variant};

/// Default success threshold on the final squared deviation.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub nonzero: NonzeroDist,
    /// Scale each drawn signal to unit Euclidean norm.
    pub unit_norm: bool,
    pub matrix: MatrixKind,
    /// Sensing entry variance; `1 / M` when absent.
    pub entry_variance: Option<f64>,
}

impl ProblemSpec {
    pub fn new(n: usize, m: usize, k: usize) -> Self {
        Self {
            n,
            m,
            k,
            nonzero: NonzeroDist::UniformSym,
            unit_norm: true,
            matrix: MatrixKind::GaussianIid,
            entry_variance: None,
        }
    }

    pub fn entry_variance(&self) -> f64 {
        self.entry_variance.unwrap_or(1.0 / self.m as f64)
    }

    /// Draws one problem instance. A GMM noise divisor is replaced by `M`.
    pub fn generate(&self, noise: &NoiseModel, trial_seed: u64) -> Result<ReconstructionProblem> {
        let x = SparseSignal::generate(
            self.n,
            self.k,
            self.nonzero,
            self.unit_norm,
            purpose_seed(trial_seed, Purpose::Signal),
        )?;
        let phi = SensingMatrix::generate(
            self.m,
            self.n,
            self.matrix,
            self.entry_variance(),
            purpose_seed(trial_seed, Purpose::Matrix),
        )?;
        let v = sample_noise(&tie_divisor(noise, self.m), self.m, purpose_seed(trial_seed, Purpose::Noise))?;
        let y = measure(&phi, x.values(), Some(&v))?;
        ReconstructionProblem::new(phi, y, Some(x))
    }
}

fn tie_divisor(noise: &NoiseModel, m: usize) -> NoiseModel {
    match *noise {
        NoiseModel::Gmm { c, sigma_a_sq, sigma_b_sq, .. } => NoiseModel::Gmm {
            c,
            sigma_a_sq,
            m: m as f64,
            sigma_b_sq,
        },
        other => other,
    }
}

/// The swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Sparsity(Vec<usize>),
    Measurements(Vec<usize>),
    /// Characteristic exponent of alpha-stable noise.
    Alpha(Vec<f64>),
    /// Nominal GMM variance `sigma_A^2`.
    SigmaASq(Vec<f64>),
    /// GMM outlier probability `c`.
    OutlierProb(Vec<f64>),
    /// Step size, applied to every solver.
    Mu(Vec<f64>),
    /// Zero-attraction weight, applied to every solver.
    Lambda(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sparsity(_) => "k",
            SweepAxis::Measurements(_) => "m",
            SweepAxis::Alpha(_) => "alpha",
            SweepAxis::SigmaASq(_) => "sigma_a_sq",
            SweepAxis::OutlierProb(_) => "c",
            SweepAxis::Mu(_) => "mu",
            SweepAxis::Lambda(_) => "lambda",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Sparsity(v) | SweepAxis::Measurements(v) => v.len(),
            SweepAxis::Alpha(v)
            | SweepAxis::SigmaASq(v)
            | SweepAxis::OutlierProb(v)
            | SweepAxis::Mu(v)
            | SweepAxis::Lambda(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value(&self, j: usize) -> f64 {
        match self {
            SweepAxis::Sparsity(v) | SweepAxis::Measurements(v) => v[j] as f64,
            SweepAxis::Alpha(v)
            | SweepAxis::SigmaASq(v)
            | SweepAxis::OutlierProb(v)
            | SweepAxis::Mu(v)
            | SweepAxis::Lambda(v) => v[j],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub noise: NoiseModel,
    pub solvers: Vec<SolverConfig>,
    pub trials: usize,
    pub success_threshold: f64,
    pub master_seed: u64,
    pub sweep: Option<SweepAxis>,
    /// Overrides every solver's trace stride.
    pub trace_stride: Option<usize>,
}

/// One fully resolved experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPoint {
    pub value: Option<f64>,
    pub problem: ProblemSpec,
    pub noise: NoiseModel,
    pub solvers: Vec<SolverConfig>,
}

impl ExperimentSpec {
    pub fn new(problem: ProblemSpec, noise: NoiseModel, solvers: Vec<SolverConfig>, trials: usize, master_seed: u64) -> Self {
        Self {
            problem,
            noise,
            solvers,
            trials,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            master_seed,
            sweep: None,
            trace_stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trial count must be at least 1"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::param(format!(
                "success threshold must be positive, got {}",
                self.success_threshold
            )));
        }
        if self.solvers.is_empty() {
            return Err(Error::param("at least one solver configuration is required"));
        }
        if self.sweep.as_ref().is_some_and(SweepAxis::is_empty) {
            return Err(Error::param("sweep axis has no values"));
        }
        if self.trace_stride == Some(0) {
            return Err(Error::param("trace stride must be at least 1"));
        }
        for point in self.points()? {
            let p = &point.problem;
            if p.k == 0 || p.k > p.n {
                return Err(Error::param(format!("sparsity K={} must lie in 1..=N={}", p.k, p.n)));
            }
            if p.m < 2 {
                return Err(Error::param(format!("need at least 2 measurements, got M={}", p.m)));
            }
            point.noise.validate()?;
            for s in &point.solvers {
                s.validate_for(p.m)?;
            }
        }
        Ok(())
    }

    /// Resolved experiment points, one per axis value (a single point without a sweep).
    pub fn points(&self) -> Result<Vec<AxisPoint>> {
        let mut base_solvers = self.solvers.clone();
        if let Some(stride) = self.trace_stride {
            base_solvers.iter_mut().for_each(|s| s.trace_stride = Some(stride));
        }
        let base = AxisPoint {
            value: None,
            problem: self.problem.clone(),
            noise: self.noise,
            solvers: base_solvers,
        };
        let Some(axis) = &self.sweep else {
            return Ok(vec![base]);
        };
        (0..axis.len())
            .map(|j| {
                let mut p = base.clone();
                let x = axis.value(j);
                p.value = Some(x);
                match (axis, &mut p.noise) {
                    (SweepAxis::Sparsity(v), _) => p.problem.k = v[j],
                    (SweepAxis::Measurements(v), _) => p.problem.m = v[j],
                    (SweepAxis::Alpha(_), NoiseModel::AlphaStable { alpha, .. }) => *alpha = x,
                    (SweepAxis::SigmaASq(_), NoiseModel::Gmm { sigma_a_sq, .. }) => *sigma_a_sq = x,
                    (SweepAxis::OutlierProb(_), NoiseModel::Gmm { c, .. }) => *c = x,
                    (SweepAxis::Mu(_), _) => p.solvers.iter_mut().for_each(|s| s.mu = x),
                    (SweepAxis::Lambda(_), _) => p.solvers.iter_mut().for_each(|s| s.lambda = x),
                    (axis, _) => {
                        return Err(Error::param(format!(
                            "sweep over `{}` does not apply to the configured noise model",
                            axis.name()
                        )))
                    }
                }
                Ok(p)
            })
            .collect()
    }
}

/// Desk-scale GMM experiment: N=1000, M=300, K=40, Gaussian sensing with
/// variance 1/M, unit-norm signals, GMM noise with c=0.04, sigma_A^2=0.01
/// and sigma_B^2=0.1, and both proposed solvers at their defaults.
pub fn desk_gmm_experiment(trials: usize, master_seed: u64) -> ExperimentSpec {
    ExperimentSpec::new(
        ProblemSpec::new(1000, 300, 40),
        NoiseModel::Gmm {
            c: 0.04,
            sigma_a_sq: 0.01,
            m: 300.0,
            sigma_b_sq: 0.1,
        },
        vec![
            SolverConfig::recommended(Variant::L0Mcc),
            SolverConfig::recommended(Variant::MbL0Mcc),
        ],
        trials,
        master_seed,
    )
}

/// Desk-scale alpha-stable experiment swept over `alphas`: K=20, nonzeros of
/// magnitude in [0.5, 1] normalized to unit norm, gamma=0.01, theta=15, and
/// lambda 1.5e-5 for l0-MCC and 5e-4 for MB-l0-MCC.
pub fn desk_alpha_stable_experiment(alphas: Vec<f64>, trials: usize, master_seed: u64) -> ExperimentSpec {
    let mut problem = ProblemSpec::new(1000, 300, 20);
    problem.nonzero = NonzeroDist::UniformAnnulus;
    let solvers = [(Variant::L0Mcc, 1.5e-5), (Variant::MbL0Mcc, 5e-4)]
        .into_iter()
        .map(|(v, lambda)| {
            let mut c = SolverConfig::recommended(v);
            c.theta = 15.0;
            c.lambda = lambda;
            c
        })
        .collect();
    let first = alphas.first().copied().unwrap_or(2.0);
    let mut spec = ExperimentSpec::new(
        problem,
        NoiseModel::AlphaStable { alpha: first, gamma: 0.01 },
        solvers,
        trials,
        master_seed,
    );
    spec.sweep = Some(SweepAxis::Alpha(alphas));
    spec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub axis_index: usize,
    pub axis_value: Option<f64>,
    pub trial: usize,
    pub variant: Variant,
    /// Seed of the problem instance.
    pub seed: u64,
    /// `||w - x||^2` at termination; absent when the solver diverged.
    pub final_squared_deviation: Option<f64>,
    pub success: bool,
    pub updates_used: usize,
    pub termination: Option<Termination>,
    pub diverged: bool,
    pub error: Option<String>,
    /// Solver wall time. Files are written without it unless requested, so
    /// reruns stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: Option<&'static str>,
    pub axis_value: Option<f64>,
    pub variant: Variant,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    /// Mean squared deviation over successful trials only.
    pub msd_success: Option<f64>,
    /// Mean squared deviation over all trials that did not diverge.
    pub msd_all: Option<f64>,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub results: Vec<SweepResult>,
    pub trials: Vec<TrialReport>,
}

impl SweepOutcome {
    /// Drops wall times so serialized output depends only on the inputs.
    pub fn without_timings(mut self) -> Self {
        self.trials.iter_mut().for_each(|t| t.wall_time_s = None);
        self
    }

    pub fn divergence_dominated(&self) -> bool {
        let diverged = self.trials.iter().filter(|t| t.diverged).count();
        2 * diverged > self.trials.len()
    }
}

/// `(1/T) sum_t ||w_t - x||^2`.
pub fn msd(estimates: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::param("msd needs at least one estimate"));
    }
    let mut total = 0.0;
    for w in estimates {
        if w.len() != x.len() {
            return Err(Error::dim(format!("estimate length {} differs from truth length {}", w.len(), x.len())));
        }
        total += w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / estimates.len() as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn run_unit(
    point: &AxisPoint,
    axis_index: usize,
    trial: usize,
    master_seed: u64,
    threshold: f64,
) -> Result<Vec<TrialRun>> {
    let seed = derive_seed(master_seed, &[axis_index as u64, trial as u64]);
    let problem = point.problem.generate(&point.noise, seed)?;
    let solver_seed = purpose_seed(seed, Purpose::Solver);
    point
        .solvers
        .iter()
        .map(|cfg| {
            let start = Instant::now();
            let outcome = run(&problem, cfg, solver_seed);
            let wall = start.elapsed().as_secs_f64();
            let mut report = TrialReport {
                axis_index,
                axis_value: point.value,
                trial,
                variant: cfg.variant,
                seed,
                final_squared_deviation: None,
                success: false,
                updates_used: 0,
                termination: None,
                diverged: false,
                error: None,
                wall_time_s: Some(wall),
            };
            match outcome {
                Ok(out) => {
                    let dev = out.trace.final_squared_deviation();
                    report.final_squared_deviation = dev;
                    report.success = dev.is_some_and(|d| d < threshold);
                    report.updates_used = out.trace.updates_used;
                    report.termination = Some(out.trace.termination);
                    Ok((report, Some(out.trace)))
                }
                Err(Error::Divergence { iteration, reason }) => {
                    report.diverged = true;
                    report.updates_used = iteration;
                    report.error = Some(format!("diverged at update {iteration}: {reason}"));
                    Ok((report, None))
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

type TrialRun = (TrialReport, Option<RunTrace>);

fn run_all(spec: &ExperimentSpec, points: &[AxisPoint]) -> Result<Vec<Vec<TrialRun>>> {
    let units: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|a| (0..spec.trials).map(move |t| (a, t)))
        .collect();
    units
        .par_iter()
        .map(|&(a, t)| run_unit(&points[a], a, t, spec.master_seed, spec.success_threshold))
        .collect()
}

/// Runs `trials` independent trials per axis point and aggregates them per
/// solver. Diverged runs count as failures.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let points = spec.points()?;
    let units = run_all(spec, &points)?;
    let trials: Vec<TrialReport> = units.into_iter().flatten().map(|(r, _)| r).collect();

    let axis = spec.sweep.as_ref().map(SweepAxis::name);
    let mut results = Vec::new();
    for (a, point) in points.iter().enumerate() {
        for cfg in &point.solvers {
            let mine: Vec<&TrialReport> = trials
                .iter()
                .filter(|t| t.axis_index == a && t.variant == cfg.variant)
                .collect();
            let successes = mine.iter().filter(|t| t.success).count();
            results.push(SweepResult {
                axis,
                axis_value: point.value,
                variant: cfg.variant,
                trials: mine.len(),
                successes,
                probability: successes as f64 / mine.len() as f64,
                msd_success: mean(mine.iter().filter(|t| t.success).filter_map(|t| t.final_squared_deviation)),
                msd_all: mean(mine.iter().filter_map(|t| t.final_squared_deviation)),
                diverged: mine.iter().filter(|t| t.diverged).count(),
            });
        }
    }
    Ok(SweepOutcome { results, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub msd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub variant: Variant,
    pub points: Vec<CurvePoint>,
    /// Trials averaged into the curve.
    pub trials: usize,
    /// Trials excluded because they diverged.
    pub diverged: usize,
}

impl LearningCurve {
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.points.iter().find(|p| p.msd < threshold).map(|p| p.iteration)
    }

    pub fn final_msd(&self) -> Option<f64> {
        self.points.last().map(|p| p.msd)
    }

    /// CSV rows `iteration,msd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iteration", "msd"]).map_err(csv_err)?;
        for p in &self.points {
            wtr.write_record([p.iteration.to_string(), p.msd.to_string()]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveOutcome {
    pub curves: Vec<LearningCurve>,
    pub trials: Vec<TrialReport>,
}

impl CurveOutcome {
    pub fn without_timings(mut self) -> Self {
        self.trials.iter_mut().for_each(|t| t.wall_time_s = None);
        self
    }

    pub fn divergence_dominated(&self) -> bool {
        let diverged = self.trials.iter().filter(|t| t.diverged).count();
        2 * diverged > self.trials.len()
    }
}

/// Squared deviation of `trace` at update `i`: the last sample taken at or
/// before `i`, which holds the final value after an early stop.
fn value_at(trace: &RunTrace, i: usize) -> f64 {
    let pos = trace.points.partition_point(|p| p.iteration <= i);
    trace.points[pos.saturating_sub(1)]
        .squared_deviation
        .expect("harness problems carry ground truth")
}

/// Pointwise mean of per-trial squared-deviation traces for a spec without a
/// sweep axis. The grid runs over multiples of each solver's trace stride up
/// to its update budget.
pub fn learning_curve(spec: &ExperimentSpec) -> Result<CurveOutcome> {
    spec.validate()?;
    if spec.sweep.is_some() {
        return Err(Error::param("learning curves need a fixed experiment point, not a sweep"));
    }
    let points = spec.points()?;
    let units = run_all(spec, &points)?;
    let point = &points[0];

    let mut curves = Vec::new();
    for (j, cfg) in point.solvers.iter().enumerate() {
        let traces: Vec<&RunTrace> = units.iter().filter_map(|u| u[j].1.as_ref()).collect();
        let stride = cfg.trace_stride();
        let grid: Vec<usize> = (0..=cfg.max_updates / stride)
            .map(|g| g * stride)
            .chain((cfg.max_updates % stride != 0).then_some(cfg.max_updates))
            .collect();
        let curve = if traces.is_empty() {
            Vec::new()
        } else {
            grid.iter()
                .map(|&i| CurvePoint {
                    iteration: i,
                    msd: traces.iter().map(|t| value_at(t, i)).sum::<f64>() / traces.len() as f64,
                })
                .collect()
        };
        curves.push(LearningCurve {
            variant: cfg.variant,
            points: curve,
            trials: traces.len(),
            diverged: units.len() - traces.len(),
        });
    }
    let trials = units.into_iter().flatten().map(|(r, _)| r).collect();
    Ok(CurveOutcome { curves, trials })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (axis point, solver).
pub fn write_sweep_csv<W: Write>(results: &[SweepResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "axis",
        "axis_value",
        "variant",
        "trials",
        "successes",
        "probability",
        "msd_success",
        "msd_all",
        "diverged",
    ])
    .map_err(csv_err)?;
    for r in results {
        wtr.write_record([
            r.axis.unwrap_or("").to_string(),
            opt(r.axis_value),
            r.variant.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            r.probability.to_string(),
            opt(r.msd_success),
            opt(r.msd_all),
            r.diverged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Output file name with the master seed embedded, e.g. `sweep_seed42.csv`.
pub fn output_name(stem: &str, seed: u64, ext: &str) -> String {
    format!("{stem}_seed{seed}.{ext}")
}
