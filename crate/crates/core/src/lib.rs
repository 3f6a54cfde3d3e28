//! Robust compressive-sensing reconstruction with l0-regularized
//! maximum-correntropy adaptive filters.
//!
//! The crate is organized bottom-up:
//!
//! - [`problem`]: sparse signals, sensing matrices, `y = Φx + v`
//! - [`noise`]: Gaussian, Gaussian-mixture and symmetric alpha-stable noise
//! - [`kernel`]: the correntropy kernel and its annealed width
//! - [`solver`]: l0-MCC, mini-batch l0-MCC and the l0-LMS limit
//! - [`stability`]: step-size bounds and the closed-form kernel moments behind them
//! - [`harness`]: Monte Carlo trials, sweeps and learning curves
//! - [`image`]: block-based image compressive sensing
//! - [`config`]: the experiment file format used by the `mcc-cs` binary

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod image;
pub mod kernel;
pub mod noise;
pub mod problem;
pub mod rng;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
pub use config::ExperimentConfig;
pub use harness::{learning_curve, msd, run_sweep, ExperimentSpec, ProblemSpec, SweepAxis, SweepResult, TrialReport};
pub use image::{dct2, idct2, psnr, reconstruct_image, sparsify_top_s, ImageCsConfig, ImageGrid};
pub use kernel::{anneal_sigma, estimate_sigma_max, kernel_weight, KernelSchedule};
pub use noise::{sample_noise, NoiseModel, Variance};
pub use problem::{measure, recursive_index, MatrixKind, NonzeroDist, ReconstructionProblem, SensingMatrix, SparseSignal};
pub use stability::{
    bound_gaussian_sensing_bounded_noise, bound_gaussian_sensing_gaussian_noise, bound_rademacher, eval_ph_pk_bounded,
    eval_ph_pk_gaussian_noise, ProbePoint,
};
pub use solver::{
    l0_lms_step, l0_mcc_step, mb_l0_mcc_step, mb_step_with_indices, run, zero_attraction, BatchSize, RunOutcome,
    RunTrace, SolverConfig, SolverState, Termination, Variant, Weighting,
};
