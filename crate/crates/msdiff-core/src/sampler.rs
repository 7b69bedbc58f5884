//! Discrete reverse-time sampling: predictor step, Langevin corrector, and
//! the predictor-corrector loop with optional data-consistency injection.

use crate::diffusion::Score;
use crate::error::{Error, Result};
use crate::raster::Sinogram;
use crate::rng::seeded;
use crate::sinogram_ops::{data_consistency, SubsampleMask};
use rand_chacha::ChaCha12Rng;

/// Step-size floor when the score norm vanishes in the SNR formula.
pub const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Reverse-time discretization count T.
    pub steps: usize,
    /// Langevin corrector iterations per predictor step.
    pub corrector_steps: usize,
    /// Signal-to-noise target for the decayed Langevin step size.
    pub snr: f64,
    /// Data-consistency weight; 0 is hard replacement by the measurement.
    pub dc_lambda: f64,
    pub seed: u64,
    /// Force every Gaussian draw to zero (diagnostic/test mode).
    pub zero_noise: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 200,
            corrector_steps: 1,
            snr: 0.16,
            dc_lambda: 0.0,
            seed: 0,
            zero_noise: false,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidSize("sampler needs steps >= 1".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Domain(format!("snr {} must be > 0", self.snr)));
        }
        if self.dc_lambda < 0.0 {
            return Err(Error::Domain(format!(
                "dc_lambda {} must be >= 0",
                self.dc_lambda
            )));
        }
        Ok(())
    }
}

/// Gaussian draws for the sampler, or all zeros in diagnostic mode.
pub enum NoiseSource {
    Seeded(Box<ChaCha12Rng>),
    Zero,
}

impl NoiseSource {
    pub fn from_config(cfg: &SamplerConfig) -> NoiseSource {
        if cfg.zero_noise {
            NoiseSource::Zero
        } else {
            NoiseSource::Seeded(Box::new(seeded(cfg.seed)))
        }
    }

    pub fn draw(&mut self, views: usize, detectors: usize) -> Sinogram {
        match self {
            NoiseSource::Seeded(rng) => Sinogram::standard_normal(views, detectors, rng),
            NoiseSource::Zero => Sinogram::zeros(views, detectors),
        }
    }
}

/// Discrete noise levels `sigma_0 = 0 < sigma_1 < ... < sigma_T` with the
/// positive part geometric between the schedule endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaGrid {
    pub sigmas: Vec<f64>,
    sigma_min: f64,
}

impl SigmaGrid {
    pub fn new(model: &dyn Score, steps: usize) -> Result<SigmaGrid> {
        if steps == 0 {
            return Err(Error::InvalidSize("sigma grid needs steps >= 1".into()));
        }
        let schedule = model.schedule();
        let mut sigmas = Vec::with_capacity(steps + 1);
        sigmas.push(0.0);
        if steps == 1 {
            sigmas.push(schedule.sigma_max);
        } else {
            for k in 1..=steps {
                sigmas.push(schedule.sigma_frac((k - 1) as f64 / (steps - 1) as f64));
            }
        }
        Ok(SigmaGrid {
            sigmas,
            sigma_min: schedule.sigma_min,
        })
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    /// Noise level the corrector evaluates the score at; `sigma_0 = 0` is
    /// clamped to `sigma_min` so the model input stays in its trained range.
    pub fn corrector_sigma(&self, k: usize) -> f64 {
        self.sigmas[k].max(self.sigma_min)
    }
}

/// One reverse-diffusion step from level k+1 down to k.
pub fn predictor_step(
    x_next: &Sinogram,
    k: usize,
    grid: &SigmaGrid,
    model: &dyn Score,
    noise: &mut NoiseSource,
) -> Result<Sinogram> {
    if k >= grid.steps() {
        return Err(Error::Domain(format!(
            "predictor index {k} outside [0, {})",
            grid.steps()
        )));
    }
    let s_next = grid.sigmas[k + 1];
    let s_cur = grid.sigmas[k];
    let ds2 = s_next * s_next - s_cur * s_cur;
    let mut x = x_next.clone();
    if ds2 > 0.0 {
        let score = model.eval(x_next, s_next);
        x.add_scaled(&score, ds2);
        let z = noise.draw(x_next.views, x_next.detectors);
        x.add_scaled(&z, ds2.sqrt());
    }
    Ok(x)
}

/// One Langevin refinement at level k with explicit step size.
///
/// `epsilon = 0` is an exact identity (used by tests); negative values are
/// rejected.
pub fn corrector_step(
    x: &Sinogram,
    k: usize,
    grid: &SigmaGrid,
    model: &dyn Score,
    epsilon: f64,
    noise: &mut NoiseSource,
) -> Result<Sinogram> {
    if epsilon < 0.0 {
        return Err(Error::Domain(format!("epsilon {epsilon} must be >= 0")));
    }
    if k > grid.steps() {
        return Err(Error::Domain(format!(
            "corrector index {k} outside [0, {}]",
            grid.steps()
        )));
    }
    if epsilon == 0.0 {
        return Ok(x.clone());
    }
    let sigma = grid.corrector_sigma(k);
    let score = model.eval(x, sigma);
    let mut out = x.clone();
    out.add_scaled(&score, epsilon);
    let z = noise.draw(x.views, x.detectors);
    out.add_scaled(&z, (2.0 * epsilon).sqrt());
    Ok(out)
}

/// Decayed Langevin step size from a signal-to-noise target:
/// `2 (snr * |z| / |S(x, sigma_k)|)^2` with a fresh Gaussian draw, floored
/// when the score norm vanishes.
pub fn epsilon_schedule(
    k: usize,
    snr: f64,
    grid: &SigmaGrid,
    model: &dyn Score,
    x: &Sinogram,
    noise: &mut NoiseSource,
) -> f64 {
    let z = noise.draw(x.views, x.detectors);
    let z_norm = z.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let score = model.eval(x, grid.corrector_sigma(k));
    let s_norm = score.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s_norm == 0.0 {
        return EPSILON_FLOOR;
    }
    let ratio = snr * z_norm / s_norm;
    (2.0 * ratio * ratio).max(EPSILON_FLOOR)
}

/// Result of a sampling run: final state plus a per-step trace. With data
/// consistency the trace holds the acquired-row residual norm after each
/// predictor (before the consistency update); otherwise the state norm.
#[derive(Debug, Clone)]
pub struct PcOutput {
    pub sinogram: Sinogram,
    pub trace: Vec<f64>,
}

fn acquired_residual(x: &Sinogram, y: &Sinogram, mask: &SubsampleMask) -> f64 {
    let mut acc = 0.0;
    for (row, &v) in mask.kept_view_indices.iter().enumerate() {
        for (a, b) in x.row(v).iter().zip(y.row(row)) {
            let d = a - b;
            acc += d * d;
        }
    }
    acc.sqrt()
}

fn state_norm(x: &Sinogram) -> f64 {
    x.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Full predictor-corrector chain from `x_init` at level T down to 0,
/// applying data consistency after every predictor and every corrector when
/// a measurement is supplied.
pub fn pc_sample(
    x_init: &Sinogram,
    model: &dyn Score,
    consistency: Option<(&SubsampleMask, &Sinogram)>,
    cfg: &SamplerConfig,
) -> Result<PcOutput> {
    cfg.validate()?;
    if let Some((mask, y)) = consistency {
        if y.views != mask.kept_count() {
            return Err(Error::DimensionMismatch(format!(
                "measurement rows {} != mask kept views {}",
                y.views,
                mask.kept_count()
            )));
        }
    }
    let grid = SigmaGrid::new(model, cfg.steps)?;
    let mut noise = NoiseSource::from_config(cfg);
    let mut x = x_init.clone();
    let mut trace = Vec::with_capacity(cfg.steps);

    for k in (0..cfg.steps).rev() {
        x = predictor_step(&x, k, &grid, model, &mut noise)?;
        match consistency {
            Some((mask, y)) => {
                trace.push(acquired_residual(&x, y, mask));
                x = data_consistency(&x, y, mask, cfg.dc_lambda)?;
            }
            None => trace.push(state_norm(&x)),
        }
        for _ in 0..cfg.corrector_steps {
            let eps = epsilon_schedule(k, cfg.snr, &grid, model, &x, &mut noise);
            x = corrector_step(&x, k, &grid, model, eps, &mut noise)?;
            if let Some((mask, y)) = consistency {
                x = data_consistency(&x, y, mask, cfg.dc_lambda)?;
            }
        }
        if !x.all_finite() {
            return Err(Error::NonFinite { step: k });
        }
    }
    Ok(PcOutput { sinogram: x, trace })
}
