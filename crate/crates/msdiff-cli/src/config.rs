//! Experiment configuration file.
//!
//! TOML with one section per subsystem; unknown keys are hard errors so
//! typos fail loudly instead of silently using defaults.

use anyhow::{bail, Context, Result};
use msdiff_core::diffusion::{NoiseSchedule, ScoreNetConfig, TrainConfig};
use msdiff_core::geometry::FanGeometry;
use msdiff_core::projector::FilterKind;
use msdiff_core::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub image_size: usize,
    pub views: usize,
    pub detectors: usize,
    #[serde(default = "default_source_distance")]
    pub source_to_center: f64,
    #[serde(default = "default_source_distance")]
    pub center_to_detector: f64,
}

fn default_source_distance() -> f64 {
    400.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub channels: usize,
    pub emb_features: usize,
    #[serde(default = "default_data_sigma")]
    pub data_sigma: f64,
}

fn default_data_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    #[serde(default)]
    pub parallel_batch: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub steps: usize,
    pub corrector_steps: usize,
    pub snr: f64,
    pub dc_lambda: f64,
    #[serde(default)]
    pub pure_noise_start: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MasksSection {
    pub acquired_views: usize,
    pub sdm_views: usize,
    /// SDM mask sizes trained/evaluated by the ablation sweep.
    #[serde(default)]
    pub sweep_sdm_views: Vec<usize>,
    /// Acquired-view counts evaluated by the ablation grid.
    #[serde(default)]
    pub eval_view_counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub train_phantoms: usize,
    pub test_phantoms: usize,
    pub ellipses: usize,
    #[serde(default)]
    pub noise_enabled: bool,
    #[serde(default = "default_photons")]
    pub incident_photons: f64,
}

fn default_photons() -> f64 {
    1e6
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every stage derives a named substream from it.
    pub seed: u64,
    #[serde(default = "default_filter")]
    pub filter: String,
    pub geometry: GeometrySection,
    pub schedule: ScheduleSection,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub sampler: SamplerSection,
    pub masks: MasksSection,
    pub dataset: DatasetSection,
    pub paths: PathsSection,
}

fn default_filter() -> String {
    "ram-lak".into()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.image_size < 16 {
            bail!("geometry.image_size must be >= 16");
        }
        if g.views == 0 || g.detectors == 0 {
            bail!("geometry.views and geometry.detectors must be positive");
        }
        let m = &self.masks;
        for (name, kept) in [
            ("masks.acquired_views", m.acquired_views),
            ("masks.sdm_views", m.sdm_views),
        ] {
            if kept == 0 || g.views % kept != 0 {
                bail!("{name} = {kept} must divide geometry.views = {}", g.views);
            }
        }
        let sdm_stride = g.views / m.sdm_views;
        if (g.views / m.acquired_views) % sdm_stride != 0 {
            bail!(
                "acquired views (stride {}) must fall on the SDM mask (stride {sdm_stride})",
                g.views / m.acquired_views
            );
        }
        for &v in m.sweep_sdm_views.iter().chain(&m.eval_view_counts) {
            if v == 0 || g.views % v != 0 {
                bail!("mask view count {v} must divide geometry.views = {}", g.views);
            }
        }
        for &v in &m.eval_view_counts {
            let stride = g.views / v;
            if stride % sdm_stride != 0 {
                bail!(
                    "eval view count {v} (stride {stride}) must fall on the SDM mask (stride {sdm_stride})"
                );
            }
        }
        self.filter_kind()?;
        if self.dataset.train_phantoms == 0 || self.dataset.test_phantoms == 0 {
            bail!("dataset.train_phantoms and dataset.test_phantoms must be positive");
        }
        if !(1..=16).contains(&self.dataset.ellipses) {
            bail!("dataset.ellipses must be in [1, 16]");
        }
        Ok(())
    }

    pub fn filter_kind(&self) -> Result<FilterKind> {
        self.filter
            .parse()
            .map_err(|e| anyhow::anyhow!("bad filter kind: {e}"))
    }

    pub fn fan_geometry(&self) -> Result<FanGeometry> {
        let g = &self.geometry;
        Ok(FanGeometry::fitted(
            g.source_to_center,
            g.center_to_detector,
            g.views,
            g.detectors,
            g.image_size,
            2.0 / g.image_size as f64,
        )?)
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule> {
        Ok(NoiseSchedule::new(
            self.schedule.sigma_min,
            self.schedule.sigma_max,
            self.schedule.steps,
        )?)
    }

    pub fn net_config(&self) -> ScoreNetConfig {
        ScoreNetConfig {
            channels: self.network.channels,
            emb_features: self.network.emb_features,
            data_sigma: self.network.data_sigma,
        }
    }

    /// Training config with the seed drawn from the named substream.
    pub fn train_config(&self, stream: &str) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            warmup_steps: self.training.warmup_steps,
            grad_clip: self.training.grad_clip,
            batch_size: self.training.batch_size,
            total_steps: self.training.total_steps,
            weighting: msdiff_core::diffusion::LossWeighting::SigmaSquared,
            seed: msdiff_core::rng::substream_seed(self.seed, stream),
            parallel_batch: self.training.parallel_batch,
        }
    }

    pub fn sampler_config(&self, stream: &str) -> SamplerConfig {
        SamplerConfig {
            steps: self.sampler.steps,
            corrector_steps: self.sampler.corrector_steps,
            snr: self.sampler.snr,
            dc_lambda: self.sampler.dc_lambda,
            seed: msdiff_core::rng::substream_seed(self.seed, stream),
            zero_noise: false,
        }
    }
}
