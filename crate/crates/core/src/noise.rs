//! Measurement-noise models: Gaussian, two-component Gaussian mixture and
//! symmetric alpha-stable.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian {
        variance: f64,
    },
    /// `(1 - c) N(0, sigma_a_sq / m) + c N(0, sigma_b_sq)`.
    Gmm {
        c: f64,
        sigma_a_sq: f64,
        m: f64,
        sigma_b_sq: f64,
    },
    /// Symmetric stable law with characteristic function `exp(-gamma^alpha |t|^alpha)`.
    AlphaStable {
        alpha: f64,
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variance {
    Finite(f64),
    Infinite,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { variance } => {
                if !(variance >= 0.0) || !variance.is_finite() {
                    return Err(Error::param(format!("gaussian variance must be >= 0, got {variance}")));
                }
            }
            NoiseModel::Gmm { c, sigma_a_sq, m, sigma_b_sq } => {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::param(format!("outlier probability c must lie in [0,1], got {c}")));
                }
                if !(sigma_a_sq > 0.0) || !(sigma_b_sq > 0.0) {
                    return Err(Error::param("GMM component variances must be positive"));
                }
                if !(m > 0.0) {
                    return Err(Error::param(format!("GMM divisor must be positive, got {m}")));
                }
            }
            NoiseModel::AlphaStable { alpha, gamma } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")));
                }
                if !(gamma > 0.0) {
                    return Err(Error::param(format!("gamma must be positive, got {gamma}")));
                }
            }
        }
        Ok(())
    }

    pub fn nominal_variance(&self) -> Variance {
        match *self {
            NoiseModel::Gaussian { variance } => Variance::Finite(variance),
            NoiseModel::Gmm { c, sigma_a_sq, m, sigma_b_sq } => {
                Variance::Finite((1.0 - c) * sigma_a_sq / m + c * sigma_b_sq)
            }
            NoiseModel::AlphaStable { alpha, gamma } => {
                if alpha >= 2.0 {
                    Variance::Finite(2.0 * gamma * gamma)
                } else {
                    Variance::Infinite
                }
            }
        }
    }

    /// Draws one value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            NoiseModel::Gmm { c, sigma_a_sq, m, sigma_b_sq } => {
                let sd = if rng.random::<f64>() < c {
                    sigma_b_sq.sqrt()
                } else {
                    (sigma_a_sq / m).sqrt()
                };
                sd * rng.sample::<f64, _>(StandardNormal)
            }
            NoiseModel::AlphaStable { alpha, gamma } => gamma * symmetric_stable(alpha, rng),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if count == 0 {
            return Err(Error::param("noise sample count must be at least 1"));
        }
        Ok((0..count).map(|_| self.draw(rng)).collect())
    }
}

/// `count` i.i.d. draws from `model` on a fresh stream seeded with `seed`.
pub fn sample_noise(model: &NoiseModel, count: usize, seed: u64) -> Result<Vec<f64>> {
    model.sample(count, &mut stream(seed))
}

pub fn nominal_variance(model: &NoiseModel) -> Variance {
    model.nominal_variance()
}

/// Unit-scale symmetric stable variate by Chambers–Mallows–Stuck.
fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // V uniform on the open interval (-pi/2, pi/2); W standard exponential.
    let v = loop {
        let u: f64 = rng.random();
        let v = (u - 0.5) * std::f64::consts::PI;
        if v.abs() < FRAC_PI_2 {
            break v;
        }
    };
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}
