//! Sufficient step-size bounds for mean-square stability of l0-MCC, and the
//! closed-form kernel moments `P_H`, `P_K` they are built on.
//!
//! With `w~ = x - w` and `e = phi^T w~ + v`, the moments are defined by
//!
//! ```text
//! P_H ||w~||^2 = E_phi[ G(e) (phi^T w~)^2 ]
//! P_K ||w~||^2 = E_phi[ G(e) ||phi||^2 (phi^T w~)^2 ]
//! ```
//!
//! for Gaussian `phi` with i.i.d. entries of variance `sigma_a^2` and
//! `G(e) = exp(-e^2 / 2 sigma^2)`. The bounded-noise forms hold `v` fixed; the
//! Gaussian-noise forms also average over `v ~ N(0, sigma_v^2)`.
//! [`monte_carlo_moments`] estimates the same expectations by sampling and
//! serves as an independent check of the closed forms.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{derive_seed, stream};

/// `mu < 2 / (N sigma_a^2)` for Rademacher sensing.
pub fn bound_rademacher(n: usize, sigma_a_sq: f64) -> f64 {
    2.0 / (n as f64 * sigma_a_sq)
}

/// `mu < 2 / ((N + 4 + v_max^2 / (4 sigma^2)) sigma_a^2)` for Gaussian sensing with `|v| <= v_max`.
pub fn bound_gaussian_sensing_bounded_noise(n: usize, sigma_a_sq: f64, sigma: f64, v_max: f64) -> f64 {
    2.0 / ((n as f64 + 4.0 + v_max * v_max / (4.0 * sigma * sigma)) * sigma_a_sq)
}

/// `mu < 2 / ((N + 2) sigma_a^2)` for Gaussian sensing with Gaussian (or zero-mean mixture) noise.
pub fn bound_gaussian_sensing_gaussian_noise(n: usize, sigma_a_sq: f64) -> f64 {
    2.0 / ((n as f64 + 2.0) * sigma_a_sq)
}

/// Ratio of the suggested practical step size to a bound.
pub const SUGGESTED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    pub wtilde_norm_sq: f64,
    /// Noise realization.
    pub v: f64,
    /// Kernel width.
    pub sigma: f64,
    pub sigma_a_sq: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMoments {
    pub p_h: f64,
    pub p_k: f64,
}

impl KernelMoments {
    pub fn ratio(&self) -> f64 {
        self.p_k / self.p_h
    }
}

/// Closed forms for a fixed noise value `v`.
pub fn eval_ph_pk_bounded(probe: &ProbePoint) -> KernelMoments {
    let &ProbePoint {
        wtilde_norm_sq,
        v,
        sigma,
        sigma_a_sq,
        n,
    } = probe;
    let s = sigma_a_sq * wtilde_norm_sq;
    let sigma2 = sigma * sigma;
    let v2 = v * v;
    let p = sigma2 + s;
    let q = p * sigma2 + s * v2;
    let lead = sigma / p.sqrt() * (-v2 / (2.0 * p)).exp();

    let p_h = lead * q / (p * p) * sigma_a_sq;
    let bracket = (n as f64 - 1.0) * q / (p * p) + 2.0 * sigma2 * (q + s * v2) / (p * p * p) + q * q / (p * p * p * p);
    let p_k = lead * bracket * sigma_a_sq * sigma_a_sq;
    KernelMoments { p_h, p_k }
}

/// Closed forms averaged over Gaussian noise of variance `sigma_v_sq`.
pub fn eval_ph_pk_gaussian_noise(n: usize, sigma: f64, sigma_a_sq: f64, sigma_v_sq: f64, wtilde_norm_sq: f64) -> KernelMoments {
    let width = sigma * sigma + sigma_v_sq;
    let total = sigma_a_sq * wtilde_norm_sq + width;
    let p_h = sigma * width * sigma_a_sq / total.powf(1.5);
    let p_k = (n as f64 - 1.0) * p_h * sigma_a_sq + 3.0 * p_h * width * sigma_a_sq / total;
    KernelMoments { p_h, p_k }
}

/// How the Monte Carlo oracle draws the sensing row.
#[derive(Debug, Clone, PartialEq)]
pub enum RowSampling {
    /// Draw all N entries and project on the given direction of `w~`
    /// (normalized internally).
    FullVector { direction: Vec<f64> },
    /// Draw the projection `phi^T u ~ N(0, sigma_a^2)` on a unit direction
    /// and the orthogonal energy `sigma_a^2 chi^2_{N-1}` separately. Exact in
    /// distribution by rotational invariance, and O(1) per sample.
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDraw {
    Fixed(f64),
    Gaussian { variance: f64 },
}

const BLOCK: usize = 1 << 15;

/// Monte Carlo estimate of `(P_H, P_K)` from their defining expectations.
/// Blocks run in parallel on independent streams and are reduced in block
/// order, so the result depends only on `seed`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_moments(
    n: usize,
    sigma: f64,
    sigma_a_sq: f64,
    wtilde_norm_sq: f64,
    noise: NoiseDraw,
    sampling: &RowSampling,
    samples: usize,
    seed: u64,
) -> KernelMoments {
    let sd_a = sigma_a_sq.sqrt();
    let wt_norm = wtilde_norm_sq.sqrt();
    let unit: Option<Vec<f64>> = match sampling {
        RowSampling::FullVector { direction } => {
            assert_eq!(direction.len(), n, "direction length must equal N");
            let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            Some(direction.iter().map(|d| d / norm).collect())
        }
        RowSampling::Projected => None,
    };
    let chi = (n > 1).then(|| ChiSquared::new((n - 1) as f64).expect("positive dof"));
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let blocks = samples.div_ceil(BLOCK);

    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(derive_seed(seed, &[b as u64]));
            let count = BLOCK.min(samples - b * BLOCK);
            let mut row = vec![0.0; if unit.is_some() { n } else { 0 }];
            let (mut h, mut k) = (0.0, 0.0);
            for _ in 0..count {
                let (delta, phi_norm_sq) = match &unit {
                    Some(u) => {
                        row.iter_mut()
                            .for_each(|r| *r = sd_a * rng.sample::<f64, _>(StandardNormal));
                        let proj: f64 = row.iter().zip(u).map(|(r, d)| r * d).sum();
                        (wt_norm * proj, row.iter().map(|r| r * r).sum::<f64>())
                    }
                    None => {
                        let along: f64 = sd_a * rng.sample::<f64, _>(StandardNormal);
                        let ortho = chi.as_ref().map_or(0.0, |c| sigma_a_sq * c.sample(&mut rng));
                        (wt_norm * along, along * along + ortho)
                    }
                };
                let v = match noise {
                    NoiseDraw::Fixed(v) => v,
                    NoiseDraw::Gaussian { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
                };
                let e = delta + v;
                let g = (-e * e * inv_two_sigma2).exp();
                let gd2 = g * delta * delta;
                h += gd2;
                k += gd2 * phi_norm_sq;
            }
            (h, k)
        })
        .collect();

    let (h, k) = partial.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let denom = samples as f64 * wtilde_norm_sq;
    KernelMoments {
        p_h: h / denom,
        p_k: k / denom,
    }
}

/// One line of the step-size advice table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundAdvice {
    pub regime: &'static str,
    pub bound: f64,
    pub suggested_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Rademacher,
    BoundedNoise,
    GaussianNoise,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Rademacher => "rademacher",
            Regime::BoundedNoise => "gaussian_sensing_bounded_noise",
            Regime::GaussianNoise => "gaussian_sensing_gaussian_noise",
        }
    }
}

/// Bound and conservative suggestion for one regime. The bounded-noise
/// regime needs `(sigma, v_max)`; `None` is returned when they are missing.
pub fn advise(regime: Regime, n: usize, sigma_a_sq: f64, kernel_and_vmax: Option<(f64, f64)>) -> Option<BoundAdvice> {
    let bound = match regime {
        Regime::Rademacher => bound_rademacher(n, sigma_a_sq),
        Regime::GaussianNoise => bound_gaussian_sensing_gaussian_noise(n, sigma_a_sq),
        Regime::BoundedNoise => {
            let (sigma, v_max) = kernel_and_vmax?;
            bound_gaussian_sensing_bounded_noise(n, sigma_a_sq, sigma, v_max)
        }
    };
    Some(BoundAdvice {
        regime: regime.name(),
        bound,
        suggested_mu: SUGGESTED_FRACTION * bound,
    })
}
