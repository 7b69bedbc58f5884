//! Variance-exploding diffusion prior: geometric noise schedule, forward
//! perturbation, a small convolutional score network trained by denoising
//! score matching, and analytic score oracles for testing.

mod dsm;
mod network;
mod train;

pub use dsm::{dsm_loss, dsm_loss_value};
pub use network::{load_checkpoint, save_checkpoint, ScoreNet, ScoreNetConfig};
pub use train::{train_score_model, trace_to_csv, LossWeighting, TraceRow, TrainConfig, TrainOutput};

use crate::error::{Error, Result};
use crate::raster::Sinogram;

/// Geometric noise scale: `sigma(t) = sigma_min * (sigma_max/sigma_min)^(t/T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Discretization count T; `t` ranges over `0..=T`.
    pub steps: usize,
}

impl NoiseSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64, steps: usize) -> Result<Self> {
        if !(sigma_min > 0.0) || !(sigma_max > sigma_min) {
            return Err(Error::Domain(format!(
                "need 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidSize("schedule needs steps >= 1".into()));
        }
        Ok(NoiseSchedule {
            sigma_min,
            sigma_max,
            steps,
        })
    }

    /// Defaults for sinograms normalized to unit maximum.
    pub fn default_for_unit_data() -> Self {
        NoiseSchedule {
            sigma_min: 0.01,
            sigma_max: 50.0,
            steps: 1000,
        }
    }

    /// Noise scale at fractional position `f` in `[0, 1]`; endpoints exact.
    pub fn sigma_frac(&self, f: f64) -> f64 {
        if f <= 0.0 {
            self.sigma_min
        } else if f >= 1.0 {
            self.sigma_max
        } else {
            self.sigma_min * (self.sigma_max / self.sigma_min).powf(f)
        }
    }

    /// Noise scale at integer time `t` in `0..=steps`.
    pub fn sigma_at(&self, t: usize) -> Result<f64> {
        if t > self.steps {
            return Err(Error::Domain(format!(
                "schedule time {t} outside [0, {}]",
                self.steps
            )));
        }
        Ok(self.sigma_frac(t as f64 / self.steps as f64))
    }
}

/// VE marginal kernel: `x0 + sigma(t) * z`.
pub fn perturb(x0: &Sinogram, t: usize, z: &Sinogram, schedule: &NoiseSchedule) -> Result<Sinogram> {
    if x0.views != z.views || x0.detectors != z.detectors {
        return Err(Error::DimensionMismatch(format!(
            "data {}x{} vs noise {}x{}",
            x0.views, x0.detectors, z.views, z.detectors
        )));
    }
    let sigma = schedule.sigma_at(t)?;
    let mut out = x0.clone();
    out.add_scaled(z, sigma);
    Ok(out)
}

/// A score function usable by the samplers: estimates the gradient of the
/// log density of noised data at noise level `sigma`.
pub trait Score: Sync {
    fn eval(&self, x: &Sinogram, sigma: f64) -> Sinogram;

    fn schedule(&self) -> &NoiseSchedule;

    /// Dataset normalization constant; callers feed `x / normalization()`.
    fn normalization(&self) -> f64 {
        1.0
    }
}

/// Exact score for data drawn from an isotropic Gaussian `N(mean, s^2 I)`:
/// after VE noising at level sigma, `score(x) = -(x - mean)/(s^2 + sigma^2)`.
pub struct GaussianAnalyticScore {
    pub mean: Sinogram,
    pub data_std: f64,
    pub schedule: NoiseSchedule,
}

impl GaussianAnalyticScore {
    pub fn new(mean: Sinogram, data_std: f64, schedule: NoiseSchedule) -> Result<Self> {
        if data_std < 0.0 {
            return Err(Error::Domain(format!("data std {data_std} must be >= 0")));
        }
        Ok(GaussianAnalyticScore {
            mean,
            data_std,
            schedule,
        })
    }
}

impl Score for GaussianAnalyticScore {
    fn eval(&self, x: &Sinogram, sigma: f64) -> Sinogram {
        let var = self.data_std * self.data_std + sigma * sigma;
        let mut out = x.clone();
        for (o, &m) in out.values.iter_mut().zip(&self.mean.values) {
            *o = -(*o - m) / var;
        }
        out
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }
}

/// Score that is identically zero; test oracle.
pub struct ZeroScore {
    pub schedule: NoiseSchedule,
}

impl Score for ZeroScore {
    fn eval(&self, x: &Sinogram, _sigma: f64) -> Sinogram {
        Sinogram::zeros(x.views, x.detectors)
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> NoiseSchedule {
        NoiseSchedule::new(0.01, 100.0, 10).unwrap()
    }

    #[test]
    fn schedule_endpoints_are_exact() {
        let s = schedule();
        assert_eq!(s.sigma_at(0).unwrap(), 0.01);
        assert_eq!(s.sigma_at(10).unwrap(), 100.0);
        assert!(s.sigma_at(11).is_err());
    }

    #[test]
    fn schedule_midpoint_is_geometric_mean() {
        let s = schedule();
        let mid = s.sigma_at(5).unwrap();
        assert!((mid - 1.0).abs() < 1e-12, "geometric midpoint {mid}");
    }

    #[test]
    fn schedule_is_strictly_increasing() {
        let s = NoiseSchedule::default_for_unit_data();
        let mut last = 0.0;
        for t in 0..=s.steps {
            let v = s.sigma_at(t).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn bad_schedules_are_rejected() {
        assert!(NoiseSchedule::new(0.0, 1.0, 10).is_err());
        assert!(NoiseSchedule::new(2.0, 1.0, 10).is_err());
        assert!(NoiseSchedule::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn perturb_with_zero_noise_is_identity() {
        let s = schedule();
        let x0 = Sinogram::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = Sinogram::zeros(2, 2);
        assert_eq!(perturb(&x0, 7, &z, &s).unwrap(), x0);
        let bad = Sinogram::zeros(2, 3);
        assert!(perturb(&x0, 7, &bad, &s).is_err());
    }

    #[test]
    fn perturbation_std_matches_sigma() {
        let s = schedule();
        let t = 6;
        let sigma = s.sigma_at(t).unwrap();
        let mut rng = crate::rng::seeded(42);
        let x0 = Sinogram::zeros(100, 1000);
        let z = Sinogram::standard_normal(100, 1000, &mut rng);
        let xt = perturb(&x0, t, &z, &s).unwrap();
        let n = xt.values.len() as f64;
        let mean: f64 = xt.values.iter().sum::<f64>() / n;
        let var: f64 = xt.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!(
            (std - sigma).abs() / sigma < 0.01,
            "empirical std {std} vs sigma {sigma}"
        );
    }

    #[test]
    fn conditional_score_target_is_scaled_noise() {
        // For x_t = x0 + sigma z the Gaussian kernel score is
        // -(x_t - x0)/sigma^2 = -z/sigma.
        let s = schedule();
        let t = 4;
        let sigma = s.sigma_at(t).unwrap();
        let mut rng = crate::rng::seeded(1);
        let x0 = Sinogram::standard_normal(4, 4, &mut rng);
        let z = Sinogram::standard_normal(4, 4, &mut rng);
        let xt = perturb(&x0, t, &z, &s).unwrap();
        for i in 0..xt.values.len() {
            let target = -(xt.values[i] - x0.values[i]) / (sigma * sigma);
            assert!((target - (-z.values[i] / sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_score_is_zero_at_the_mean_and_linear_in_x() {
        let s = schedule();
        let mean = Sinogram::from_values(2, 2, vec![0.5; 4]).unwrap();
        let model = GaussianAnalyticScore::new(mean.clone(), 0.3, s.clone()).unwrap();
        let sigma = 0.7;
        let at_mean = model.eval(&mean, sigma);
        assert!(at_mean.values.iter().all(|&v| v == 0.0));

        let slope = -1.0 / (0.3f64 * 0.3 + sigma * sigma);
        let mut x = mean.clone();
        x.values[2] += 1.25;
        let out = model.eval(&x, sigma);
        assert!((out.values[2] - slope * 1.25).abs() < 1e-12);
        assert_eq!(out.values[0], 0.0);

        assert!(GaussianAnalyticScore::new(mean, -1.0, s).is_err());
    }
}
