//! TOML experiment files for the `mcc-cs` binary.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [problem]
//! n = 1000
//! m = 300
//! k = 40
//!
//! [noise]
//! kind = "gmm"
//! c = 0.04
//! sigma_a_sq = 0.01
//! sigma_b_sq = 0.1
//!
//! [experiment]
//! trials = 50
//!
//! [sweep]
//! parameter = "sparsity"
//! values = [40, 80, 150]
//!
//! [[solver]]
//! variant = "l0_mcc"
//!
//! [[solver]]
//! variant = "mb_l0_mcc"
//! batch_fraction = 0.1
//! ```
//!
//! Unknown keys are rejected. Omitted solver fields take the defaults of
//! [`SolverConfig::recommended`]; omitting `[[solver]]` runs l0-MCC and
//! MB-l0-MCC side by side. The GMM nominal variance is divided by `M`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, ProblemSpec, SweepAxis, DEFAULT_SUCCESS_THRESHOLD};
use crate::image::{image_solver_defaults, ImageCsConfig, DEFAULT_BLOCK};
use crate::noise::NoiseModel;
use crate::problem::{MatrixKind, NonzeroDist};
use crate::solver::{BatchSize, SolverConfig, Variant};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub problem: Option<ProblemSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub sweep: Option<SweepAxis>,
    #[serde(default)]
    pub solver: Vec<SolverSection>,
    pub image: Option<ImageSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    #[serde(default = "default_nonzero")]
    pub nonzero: NonzeroDist,
    #[serde(default = "yes")]
    pub unit_norm: bool,
    #[serde(default = "default_matrix")]
    pub matrix: MatrixKind,
    pub entry_variance: Option<f64>,
}

fn default_nonzero() -> NonzeroDist {
    NonzeroDist::UniformSym
}

fn default_matrix() -> MatrixKind {
    MatrixKind::GaussianIid
}

fn yes() -> bool {
    true
}

/// Noise as written in a file: the GMM divisor is implied by `M`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSection {
    #[default]
    None,
    Gaussian {
        variance: f64,
    },
    Gmm {
        c: f64,
        sigma_a_sq: f64,
        sigma_b_sq: f64,
    },
    AlphaStable {
        alpha: f64,
        gamma: f64,
    },
}

impl NoiseSection {
    /// The model with the GMM divisor set to `m`; `None` when noiseless.
    pub fn model(&self, m: usize) -> Option<NoiseModel> {
        match *self {
            NoiseSection::None => None,
            NoiseSection::Gaussian { variance } => Some(NoiseModel::Gaussian { variance }),
            NoiseSection::Gmm { c, sigma_a_sq, sigma_b_sq } => Some(NoiseModel::Gmm {
                c,
                sigma_a_sq,
                m: m as f64,
                sigma_b_sq,
            }),
            NoiseSection::AlphaStable { alpha, gamma } => Some(NoiseModel::AlphaStable { alpha, gamma }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    pub trace_stride: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            success_threshold: default_threshold(),
            trace_stride: None,
        }
    }
}

fn default_trials() -> usize {
    50
}

fn default_threshold() -> f64 {
    DEFAULT_SUCCESS_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub variant: Variant,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub theta: Option<f64>,
    pub max_updates: Option<usize>,
    pub epsilon: Option<f64>,
    pub batch_fraction: Option<f64>,
    pub batch_size: Option<usize>,
    pub with_replacement: Option<bool>,
    pub window: Option<usize>,
}

impl SolverSection {
    fn resolve(&self, base: SolverConfig) -> SolverConfig {
        let mut c = base;
        c.variant = self.variant;
        c.mu = self.mu.unwrap_or(c.mu);
        c.lambda = self.lambda.unwrap_or(c.lambda);
        c.beta = self.beta.unwrap_or(c.beta);
        c.sigma_min = self.sigma_min.unwrap_or(c.sigma_min);
        c.sigma_max = self.sigma_max.or(c.sigma_max);
        c.theta = self.theta.unwrap_or(c.theta);
        c.max_updates = self.max_updates.unwrap_or(c.max_updates);
        c.epsilon = self.epsilon.unwrap_or(c.epsilon);
        if let Some(f) = self.batch_fraction {
            c.batch = BatchSize::FractionOfRows(f);
        }
        if let Some(s) = self.batch_size {
            c.batch = BatchSize::Fixed(s);
        }
        c.with_replacement = self.with_replacement.unwrap_or(c.with_replacement);
        c.window = self.window.or(c.window);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSection {
    #[serde(default = "default_block")]
    pub block: usize,
    pub s: Option<usize>,
    #[serde(default = "default_m_img")]
    pub m_img: usize,
    #[serde(default = "default_matrix")]
    pub matrix: MatrixKind,
    pub solver: Option<SolverSection>,
}

fn default_block() -> usize {
    DEFAULT_BLOCK
}

fn default_m_img() -> usize {
    500
}

impl ExperimentConfig {
    /// Parses and validates; every error names the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<document>".into() } else { path }, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::with_path(e, path))?;
        Self::from_toml_str(&text)
    }

    fn solver_configs(&self) -> Vec<SolverConfig> {
        if self.solver.is_empty() {
            return vec![
                SolverConfig::recommended(Variant::L0Mcc),
                SolverConfig::recommended(Variant::MbL0Mcc),
            ];
        }
        self.solver
            .iter()
            .map(|s| s.resolve(SolverConfig::recommended(s.variant)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        match self.noise {
            NoiseSection::None => {}
            NoiseSection::Gaussian { variance } => {
                if !(variance >= 0.0) {
                    return Err(Error::config("noise.variance", format!("must be >= 0, got {variance}")));
                }
            }
            NoiseSection::Gmm { c, sigma_a_sq, sigma_b_sq } => {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::config("noise.c", format!("must lie in [0, 1], got {c}")));
                }
                positive("noise.sigma_a_sq", sigma_a_sq)?;
                positive("noise.sigma_b_sq", sigma_b_sq)?;
            }
            NoiseSection::AlphaStable { alpha, gamma } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::config("noise.alpha", format!("must lie in (0, 2], got {alpha}")));
                }
                positive("noise.gamma", gamma)?;
            }
        }
        if self.experiment.trials == 0 {
            return Err(Error::config("experiment.trials", "must be at least 1"));
        }
        positive("experiment.success_threshold", self.experiment.success_threshold)?;
        if self.experiment.trace_stride == Some(0) {
            return Err(Error::config("experiment.trace_stride", "must be at least 1"));
        }
        if let Some(axis) = &self.sweep {
            if axis.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
            let fits = match axis {
                SweepAxis::Alpha(_) => matches!(self.noise, NoiseSection::AlphaStable { .. }),
                SweepAxis::SigmaASq(_) | SweepAxis::OutlierProb(_) => matches!(self.noise, NoiseSection::Gmm { .. }),
                _ => true,
            };
            if !fits {
                return Err(Error::config(
                    "sweep.parameter",
                    format!("`{}` does not apply to the configured noise", axis.name()),
                ));
            }
        }

        let m_values: Vec<usize> = match (&self.problem, &self.sweep) {
            (Some(p), Some(SweepAxis::Measurements(ms))) => ms.iter().copied().chain([p.m]).collect(),
            (Some(p), _) => vec![p.m],
            (None, _) => vec![],
        };
        if let Some(p) = &self.problem {
            if p.n == 0 {
                return Err(Error::config("problem.n", "must be at least 1"));
            }
            if let Some(v) = p.entry_variance {
                positive("problem.entry_variance", v)?;
            }
            let ks: Vec<usize> = match &self.sweep {
                Some(SweepAxis::Sparsity(ks)) => ks.clone(),
                _ => vec![p.k],
            };
            for k in ks {
                if k == 0 || k > p.n {
                    return Err(Error::config("problem.k", format!("K={k} must lie in 1..=N={}", p.n)));
                }
            }
            for &m in &m_values {
                if m < 2 {
                    return Err(Error::config("problem.m", format!("need at least 2 measurements, got {m}")));
                }
                if p.matrix == MatrixKind::Orthogonal && m != p.n {
                    return Err(Error::config("problem.matrix", "an orthogonal matrix needs M = N"));
                }
            }
        }

        for (i, (section, cfg)) in self.solver.iter().zip(self.solver_configs()).enumerate() {
            check_solver(&format!("solver[{i}]"), section, &cfg, &m_values)?;
        }
        if let Some(img) = &self.image {
            if img.block == 0 {
                return Err(Error::config("image.block", "must be at least 1"));
            }
            let n = img.block * img.block;
            if let Some(s) = img.s {
                if s == 0 || s > n {
                    return Err(Error::config("image.s", format!("must lie in 1..={n}, got {s}")));
                }
            }
            if img.m_img < 2 {
                return Err(Error::config("image.m_img", format!("need at least 2, got {}", img.m_img)));
            }
            if img.matrix == MatrixKind::Orthogonal && img.m_img != n {
                return Err(Error::config("image.matrix", format!("an orthogonal matrix needs m_img = {n}")));
            }
            if let Some(section) = &img.solver {
                let cfg = self.image_solver(section);
                check_solver("image.solver", section, &cfg, &[img.m_img])?;
            }
        }
        Ok(())
    }

    fn image_solver(&self, section: &SolverSection) -> SolverConfig {
        let base = if section.variant == Variant::MbL0Mcc {
            image_solver_defaults()
        } else {
            let mut c = SolverConfig::recommended(section.variant);
            c.epsilon = 0.0;
            c
        };
        section.resolve(base)
    }

    /// Harness spec; `seed` and `trace_stride` override the file when given.
    pub fn experiment_spec(&self, seed: Option<u64>, trace_stride: Option<usize>) -> Result<ExperimentSpec> {
        let p = self
            .problem
            .as_ref()
            .ok_or_else(|| Error::config("problem", "section is required for simulate and sweep"))?;
        let noise = self
            .noise
            .model(p.m)
            .unwrap_or(NoiseModel::Gaussian { variance: 0.0 });
        Ok(ExperimentSpec {
            problem: ProblemSpec {
                n: p.n,
                m: p.m,
                k: p.k,
                nonzero: p.nonzero,
                unit_norm: p.unit_norm,
                matrix: p.matrix,
                entry_variance: p.entry_variance,
            },
            noise,
            solvers: self.solver_configs(),
            trials: self.experiment.trials,
            success_threshold: self.experiment.success_threshold,
            master_seed: seed.unwrap_or(self.seed),
            sweep: self.sweep.clone(),
            trace_stride: trace_stride.or(self.experiment.trace_stride),
        })
    }

    /// Image pipeline settings; defaults apply when `[image]` is absent.
    pub fn image_config(&self, trace_stride: Option<usize>) -> ImageCsConfig {
        let section = self.image.clone().unwrap_or(ImageSection {
            block: default_block(),
            s: None,
            m_img: default_m_img(),
            matrix: default_matrix(),
            solver: None,
        });
        let mut solver = match &section.solver {
            Some(s) => self.image_solver(s),
            None => image_solver_defaults(),
        };
        solver.trace_stride = trace_stride.or(self.experiment.trace_stride);
        ImageCsConfig {
            block: section.block,
            s: section.s.unwrap_or(section.block * section.block),
            m_img: section.m_img,
            matrix: section.matrix,
            noise: self.noise.model(section.m_img),
            solver,
        }
    }
}

fn check_solver(prefix: &str, section: &SolverSection, cfg: &SolverConfig, m_values: &[usize]) -> Result<()> {
    let field = |name: &str| format!("{prefix}.{name}");
    let bad = |name: &str, msg: String| Err(Error::config(field(name), msg));
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) {
        return bad("mu", format!("must be positive, got {}", cfg.mu));
    }
    if !(cfg.lambda >= 0.0) {
        return bad("lambda", format!("must be >= 0, got {}", cfg.lambda));
    }
    if !(cfg.beta > 0.0) {
        return bad("beta", format!("must be positive, got {}", cfg.beta));
    }
    if !(cfg.sigma_min > 0.0) {
        return bad("sigma_min", format!("must be positive, got {}", cfg.sigma_min));
    }
    if cfg.sigma_max.is_some_and(|s| !(s > 0.0)) {
        return bad("sigma_max", "must be positive".into());
    }
    if !(cfg.theta >= 0.0) {
        return bad("theta", format!("must be >= 0, got {}", cfg.theta));
    }
    if cfg.max_updates == 0 {
        return bad("max_updates", "must be at least 1".into());
    }
    if !(cfg.epsilon >= 0.0) {
        return bad("epsilon", format!("must be >= 0, got {}", cfg.epsilon));
    }
    if cfg.window == Some(0) {
        return bad("window", "must be at least 1".into());
    }
    if section.batch_fraction.is_some() && section.batch_size.is_some() {
        return bad("batch_size", "give either batch_size or batch_fraction, not both".into());
    }
    let batch_field = if section.batch_size.is_some() { "batch_size" } else { "batch_fraction" };
    match cfg.batch {
        BatchSize::Fixed(0) => return bad(batch_field, "must be at least 1".into()),
        BatchSize::FractionOfRows(f) if !(f > 0.0 && f <= 1.0) => {
            return bad(batch_field, format!("must lie in (0, 1], got {f}"))
        }
        _ => {}
    }
    if cfg.variant == Variant::MbL0Mcc {
        for &m in m_values {
            let s = cfg.batch.resolve(m);
            if s > m {
                return bad(batch_field, format!("batch size S={s} exceeds measurement count M={m}"));
            }
        }
    }
    cfg.validate_for(m_values.first().copied().unwrap_or(usize::MAX))
        .map_err(|e| Error::config(prefix, e.to_string()))?;
    Ok(())
}
