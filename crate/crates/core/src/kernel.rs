//! Gaussian correntropy kernel and the annealed kernel-width schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound of the annealed kernel width.
pub const DEFAULT_SIGMA_MIN: f64 = 0.03;

/// Smallest admissible estimated `sigma_max`.
pub const SIGMA_MAX_FLOOR: f64 = 1e-3;

/// Unnormalized Gaussian kernel `exp(-e^2 / (2 sigma^2))`.
pub fn kernel_weight(e: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("kernel width must be positive, got {sigma}")));
    }
    Ok(gaussian_kernel(e, sigma))
}

#[inline]
pub(crate) fn gaussian_kernel(e: f64, sigma: f64) -> f64 {
    (-e * e / (2.0 * sigma * sigma)).exp()
}

/// `sigma(i) = sigma_max * exp(-theta * i / horizon) + sigma_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSchedule {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub theta: f64,
    /// Maximum iteration count `C` the decay is normalized by.
    pub horizon: usize,
}

impl KernelSchedule {
    pub fn new(sigma_max: f64, sigma_min: f64, theta: f64, horizon: usize) -> Result<Self> {
        if !(sigma_max > 0.0) || !(sigma_min > 0.0) {
            return Err(Error::param("kernel widths sigma_max and sigma_min must be positive"));
        }
        if !(theta >= 0.0) {
            return Err(Error::param(format!("decay rate theta must be >= 0, got {theta}")));
        }
        if horizon == 0 {
            return Err(Error::param("schedule horizon must be at least 1"));
        }
        Ok(Self {
            sigma_max,
            sigma_min,
            theta,
            horizon,
        })
    }

    #[inline]
    pub fn sigma_at(&self, i: usize) -> f64 {
        anneal_sigma(i, self)
    }
}

#[inline]
pub fn anneal_sigma(i: usize, schedule: &KernelSchedule) -> f64 {
    schedule.sigma_max * (-schedule.theta * i as f64 / schedule.horizon as f64).exp() + schedule.sigma_min
}

/// Linear-interpolation quantile of already sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Data-driven initial width: half the 0.125–0.875 interquantile range of the
/// measurements minus `sigma_min`, floored at [`SIGMA_MAX_FLOOR`].
pub fn estimate_sigma_max(y: &[f64], sigma_min: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::dim(format!(
            "sigma_max estimation needs at least 2 measurements, got {}",
            y.len()
        )));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let raw = 0.5 * (quantile_sorted(&sorted, 0.875) - quantile_sorted(&sorted, 0.125)) - sigma_min;
    Ok(if raw > SIGMA_MAX_FLOOR { raw } else { SIGMA_MAX_FLOOR })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_weight(0.0, 0.3).unwrap(), 1.0);
        assert!((kernel_weight(0.3, 0.3).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        let far = kernel_weight(10.0 * 0.3, 0.3).unwrap();
        assert!((far / (-50.0f64).exp() - 1.0).abs() < 1e-12);
        assert!((far - 1.93e-22).abs() < 1e-24);
        assert!(kernel_weight(1.0, 0.0).is_err());
        assert!(kernel_weight(1.0, -1.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        let s = KernelSchedule::new(0.5, 0.03, 20.0, 10_000).unwrap();
        assert_eq!(anneal_sigma(0, &s), 0.53);
        let end = anneal_sigma(10_000, &s);
        assert!((end - (0.03 + 0.5 * (-20.0f64).exp())).abs() < 1e-15);
        assert!(((end - 0.03) / 0.5 - 2.06e-9).abs() < 1e-11);

        let flat = KernelSchedule::new(0.5, 0.03, 0.0, 100).unwrap();
        for i in [0, 1, 50, 100, 1000] {
            assert_eq!(anneal_sigma(i, &flat), 0.53);
        }
    }

    #[test]
    fn sigma_max_estimation() {
        let y: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        assert!((estimate_sigma_max(&y, 0.03).unwrap() - 0.345).abs() < 1e-12);

        assert_eq!(estimate_sigma_max(&[0.2; 10], 0.03).unwrap(), SIGMA_MAX_FLOOR);

        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(estimate_sigma_max(&y, 0.03).unwrap(), estimate_sigma_max(&neg, 0.03).unwrap());

        assert!(matches!(estimate_sigma_max(&[], 0.03), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn kernel_even_and_monotone(e in 1e-3f64..5.0, sigma in 0.01f64..5.0, de in 1e-3f64..1.0, ds in 1e-3f64..1.0) {
            let k = kernel_weight(e, sigma).unwrap();
            prop_assert_eq!(k, kernel_weight(-e, sigma).unwrap());
            let farther = kernel_weight(e + de, sigma).unwrap();
            let wider = kernel_weight(e, sigma + ds).unwrap();
            // Strictness can be lost only to underflow at both ends.
            prop_assert!(farther < k || k == 0.0);
            prop_assert!(wider > k || wider == 1.0 || wider == 0.0);
            prop_assert!(k > 0.0 || e / sigma > 30.0);
            prop_assert!(k <= 1.0);
        }

        #[test]
        fn schedule_is_log_linear(sigma_max in 0.1f64..2.0, theta in 0.0f64..8.0, horizon in 1usize..100_000, i in 0usize..100_000) {
            let i = i % (horizon + 1);
            let s = KernelSchedule::new(sigma_max, 0.03, theta, horizon).unwrap();
            let a = anneal_sigma(i, &s) - s.sigma_min;
            let b = anneal_sigma(i + 1, &s) - s.sigma_min;
            // Below ~1e-5 the subtraction of sigma_min dominates the rounding error.
            prop_assume!(a > 1e-5 && b > 1e-5);
            let drop = a.ln() - b.ln();
            prop_assert!((drop - theta / horizon as f64).abs() < 1e-12);
            prop_assert!(anneal_sigma(i + 1, &s) <= anneal_sigma(i, &s));
            if i <= horizon {
                let v = anneal_sigma(i, &s);
                prop_assert!(v > s.sigma_min && v <= s.sigma_max + s.sigma_min);
            }
        }
    }
}
