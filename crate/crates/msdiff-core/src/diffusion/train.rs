//! Score-model training: Adam with linear warmup and gradient-norm clipping.

use super::dsm::dsm_loss;
use super::network::{ScoreNet, ScoreNetConfig};
use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::raster::Sinogram;
use crate::rng::seeded;
use crate::sinogram_ops::{apply_mask, SubsampleMask};
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossWeighting {
    /// `lambda(t) = sigma(t)^2`; keeps the loss scale uniform across t.
    SigmaSquared,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub weighting: LossWeighting,
    pub seed: u64,
    /// Evaluate batch items in parallel. The per-item gradients are still
    /// summed in item order, so results stay bit-identical to serial mode.
    pub parallel_batch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            warmup_steps: 5000,
            grad_clip: 1.0,
            batch_size: 2,
            total_steps: 10000,
            weighting: LossWeighting::SigmaSquared,
            seed: 0,
            parallel_batch: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::Domain(
                "learning rate and gradient clip must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.total_steps == 0 || self.warmup_steps == 0 {
            return Err(Error::Domain(
                "batch size, warmup steps, and total steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ScoreNet,
    pub trace: Vec<TraceRow>,
}

/// Loss trace as plain-text CSV.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,loss,learning_rate\n");
    for row in trace {
        out.push_str(&format!("{},{:.9e},{:.9e}\n", row.step, row.loss, row.learning_rate));
    }
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
}

impl Adam {
    fn new(count: usize) -> Adam {
        Adam {
            m: vec![0.0; count],
            v: vec![0.0; count],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let b1c = 1.0 - self.beta1.powi(self.t as i32);
        let b2c = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / b1c;
            let vhat = self.v[i] / b2c;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Linear warmup to the configured rate, then constant.
fn lr_at(cfg: &TrainConfig, step: usize) -> f64 {
    let ramp = (step as f64 / cfg.warmup_steps as f64).min(1.0);
    cfg.learning_rate * ramp
}

/// Train a score network on a sinogram collection.
///
/// The dataset is normalized to unit maximum (the constant is stored on the
/// returned model). When `mask` is given, every batch item is row-masked
/// before use and the dropped rows are checked to be identically zero.
pub fn train_score_model(
    dataset: &[Sinogram],
    mask: Option<&SubsampleMask>,
    net_config: ScoreNetConfig,
    schedule: NoiseSchedule,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidSize("empty training dataset".into()));
    }
    let views = dataset[0].views;
    let detectors = dataset[0].detectors;
    for s in dataset {
        if s.views != views || s.detectors != detectors {
            return Err(Error::DimensionMismatch(
                "dataset sinograms must share one shape".into(),
            ));
        }
        if !s.all_finite() {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
    }

    let norm = dataset
        .iter()
        .map(Sinogram::max_abs)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let prepared: Vec<Sinogram> = dataset
        .iter()
        .map(|s| {
            let scaled = s.scaled(1.0 / norm);
            match mask {
                Some(m) => apply_mask(&scaled, m),
                None => Ok(scaled),
            }
        })
        .collect::<Result<_>>()?;
    if let Some(m) = mask {
        for s in &prepared {
            for v in 0..s.views {
                if !m.is_kept(v) && s.row(v).iter().any(|&x| x != 0.0) {
                    return Err(Error::Mask(format!(
                        "masked training row {v} is not zero"
                    )));
                }
            }
        }
    }

    let mut rng = seeded(cfg.seed);
    let mut net = ScoreNet::init(net_config, schedule.clone(), &mut rng)?;
    net.normalization = norm;
    let mut adam = Adam::new(net.param_count());
    let mut trace = Vec::with_capacity(cfg.total_steps);

    for step in 1..=cfg.total_steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        let mut ts = Vec::with_capacity(cfg.batch_size);
        let mut zs = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let idx = rng.gen_range(0..prepared.len());
            // t uniform over [0, T-1].
            let t = rng.gen_range(0..schedule.steps);
            batch.push(prepared[idx].clone());
            ts.push(t);
            zs.push(Sinogram::standard_normal(views, detectors, &mut rng));
        }

        let (loss, mut grads) = if cfg.parallel_batch {
            // Per-item passes in parallel; sums taken in item order so the
            // result matches serial execution bit for bit.
            let items: Vec<(f64, Vec<f64>)> = (0..cfg.batch_size)
                .into_par_iter()
                .map(|i| {
                    dsm_loss(
                        &net,
                        &batch[i..=i],
                        &ts[i..=i],
                        &zs[i..=i],
                    )
                    .expect("validated batch")
                })
                .collect();
            let mut grads = vec![0.0f64; net.param_count()];
            let mut loss = 0.0;
            let b = cfg.batch_size as f64;
            for (item_loss, item_grads) in items {
                loss += item_loss / b;
                for (g, ig) in grads.iter_mut().zip(item_grads) {
                    *g += ig / b;
                }
            }
            (loss, grads)
        } else {
            dsm_loss(&net, &batch, &ts, &zs)?
        };

        if !loss.is_finite() {
            return Err(Error::Divergence { step });
        }

        let gnorm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm > cfg.grad_clip {
            let scale = cfg.grad_clip / gnorm;
            for g in &mut grads {
                *g *= scale;
            }
        }

        let lr = lr_at(cfg, step);
        adam.step(net.params_mut(), &grads, lr);
        trace.push(TraceRow {
            step,
            loss,
            learning_rate: lr,
        });
    }

    Ok(TrainOutput { model: net, trace })
}
