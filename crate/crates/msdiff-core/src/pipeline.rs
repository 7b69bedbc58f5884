//! MSDiff reconstruction: bilinear initialization, alternating SDM/FDM
//! predictor-corrector updates with data consistency, final filtered
//! back-projection, plus the FDM-only and SDM-only comparison paths and the
//! ablation/mask-sweep harness.

use crate::diffusion::Score;
use crate::error::{Error, Result};
use crate::geometry::FanGeometry;
use crate::metrics;
use crate::projector::{fbp, forward_project, FilterKind};
use crate::raster::{ImageGrid, Sinogram};
use crate::rng::substream_seed;
use crate::sampler::{
    corrector_step, epsilon_schedule, predictor_step, NoiseSource, SamplerConfig,
    SigmaGrid,
};
use crate::sinogram_ops::{
    apply_complement, apply_mask, data_consistency, extract_sparse, interpolate_sinogram,
    SubsampleMask,
};

/// Everything needed to reconstruct one ultra-sparse acquisition.
pub struct ReconstructionJob<'a> {
    /// Compact measured sinogram (one row per acquired view).
    pub measurement: Sinogram,
    /// Acquisition mask over the full view grid.
    pub acq_mask: SubsampleMask,
    /// SDM training mask; must contain every acquired view.
    pub sdm_mask: SubsampleMask,
    pub fdm: &'a dyn Score,
    pub sdm: Option<&'a dyn Score>,
    pub sampler: SamplerConfig,
    pub geometry: FanGeometry,
    /// Start the chain from pure noise instead of noise over the
    /// interpolation.
    pub pure_noise_start: bool,
    pub filter: FilterKind,
}

impl<'a> ReconstructionJob<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.acq_mask.total_views != self.geometry.views() {
            return Err(Error::DimensionMismatch(format!(
                "mask covers {} views, geometry has {}",
                self.acq_mask.total_views,
                self.geometry.views()
            )));
        }
        if self.sdm_mask.total_views != self.acq_mask.total_views {
            return Err(Error::Mask("masks must cover the same view grid".into()));
        }
        if self.sdm_mask.kept_count() < self.acq_mask.kept_count() {
            return Err(Error::Mask(format!(
                "SDM mask keeps {} views, fewer than the {} acquired",
                self.sdm_mask.kept_count(),
                self.acq_mask.kept_count()
            )));
        }
        if !self.acq_mask.is_subset_of(&self.sdm_mask) {
            return Err(Error::Mask(
                "acquired views must be a subset of the SDM mask".into(),
            ));
        }
        if self.measurement.views != self.acq_mask.kept_count()
            || self.measurement.detectors != self.geometry.detector_count
        {
            return Err(Error::DimensionMismatch(format!(
                "measurement {}x{} does not match {} acquired views x {} detectors",
                self.measurement.views,
                self.measurement.detectors,
                self.acq_mask.kept_count(),
                self.geometry.detector_count
            )));
        }
        if let Some(sdm) = self.sdm {
            let (a, b) = (self.fdm.normalization(), sdm.normalization());
            if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
                return Err(Error::Domain(format!(
                    "FDM ({a}) and SDM ({b}) normalization constants differ; \
                     train both on the same collection"
                )));
            }
        }
        Ok(())
    }
}

/// Bilinear initialization: interpolate the compact measurement up to the
/// full view grid.
pub fn initialize(measurement: &Sinogram, geometry: &FanGeometry) -> Result<Sinogram> {
    interpolate_sinogram(measurement, geometry.views())
}

/// One outer MSDiff iteration at level k, split into its two sub-steps.
pub struct MsdiffStepper<'a> {
    pub fdm: &'a dyn Score,
    pub sdm: &'a dyn Score,
    pub acq_mask: &'a SubsampleMask,
    pub sdm_mask: &'a SubsampleMask,
    /// Measurement in the models' normalized units.
    pub y: &'a Sinogram,
    pub grid: SigmaGrid,
    pub cfg: &'a SamplerConfig,
}

impl<'a> MsdiffStepper<'a> {
    fn consistency(&self, x: Sinogram) -> Result<Sinogram> {
        data_consistency(&x, self.y, self.acq_mask, self.cfg.dc_lambda)
    }

    /// Predictor + consistency, then correctors with consistency, using one
    /// model on the given state.
    fn pc_at(
        &self,
        x: Sinogram,
        k: usize,
        model: &dyn Score,
        noise: &mut NoiseSource,
    ) -> Result<(Sinogram, f64)> {
        let mut x = predictor_step(&x, k, &self.grid, model, noise)?;
        let residual = acquired_residual(&x, self.y, self.acq_mask);
        x = self.consistency(x)?;
        for _ in 0..self.cfg.corrector_steps {
            let eps = epsilon_schedule(k, self.cfg.snr, &self.grid, model, &x, noise);
            x = corrector_step(&x, k, &self.grid, model, eps, noise)?;
            x = self.consistency(x)?;
        }
        Ok((x, residual))
    }

    /// SDM arm: split off the masked sub-sinogram, refine it, and recombine
    /// with the untouched complement. The refined part is re-masked before
    /// recombination so rows outside the SDM mask are conserved exactly.
    pub fn sdm_substep(
        &self,
        x: &Sinogram,
        k: usize,
        noise: &mut NoiseSource,
    ) -> Result<Sinogram> {
        let masked = apply_mask(x, self.sdm_mask)?;
        let complement = apply_complement(x, self.sdm_mask)?;
        let (refined, _) = self.pc_at(masked, k, self.sdm, noise)?;
        let mut out = apply_mask(&refined, self.sdm_mask)?;
        out.add_scaled(&complement, 1.0);
        Ok(out)
    }

    /// FDM arm: full-raster refinement. Returns the acquired-row residual
    /// measured after the predictor, before consistency.
    pub fn fdm_substep(
        &self,
        x: &Sinogram,
        k: usize,
        noise: &mut NoiseSource,
    ) -> Result<(Sinogram, f64)> {
        self.pc_at(x.clone(), k, self.fdm, noise)
    }

    /// Full outer iteration: SDM arm then FDM arm.
    pub fn step(&self, x: &Sinogram, k: usize, noise: &mut NoiseSource) -> Result<(Sinogram, f64)> {
        let mid = self.sdm_substep(x, k, noise)?;
        self.fdm_substep(&mid, k, noise)
    }
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

/// Reconstruction artifacts: image, final sinogram, and the per-iteration
/// acquired-row residual (pre-consistency).
#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub image: ImageGrid,
    pub sinogram: Sinogram,
    pub trace: Vec<f64>,
}

fn chain_start(
    init: &Sinogram,
    sigma_max: f64,
    pure_noise: bool,
    noise: &mut NoiseSource,
) -> Sinogram {
    let z = noise.draw(init.views, init.detectors);
    let mut x = if pure_noise {
        Sinogram::zeros(init.views, init.detectors)
    } else {
        init.clone()
    };
    x.add_scaled(&z, sigma_max);
    x
}

/// Full MSDiff reconstruction (Algorithm: interpolate, alternate SDM/FDM
/// with consistency for k = T-1..0, then filtered back-projection).
pub fn msdiff_reconstruct(job: &ReconstructionJob) -> Result<ReconOutput> {
    job.validate()?;
    let sdm = job
        .sdm
        .ok_or_else(|| Error::Mask("MSDiff reconstruction needs an SDM".into()))?;
    let norm = job.fdm.normalization();
    let y = job.measurement.scaled(1.0 / norm);
    let init = initialize(&y, &job.geometry)?;
    let grid = SigmaGrid::new(job.fdm, job.sampler.steps)?;
    let sigma_max = job.fdm.schedule().sigma_max;
    let mut noise = NoiseSource::from_config(&job.sampler);
    let stepper = MsdiffStepper {
        fdm: job.fdm,
        sdm,
        acq_mask: &job.acq_mask,
        sdm_mask: &job.sdm_mask,
        y: &y,
        grid,
        cfg: &job.sampler,
    };
    let mut x = chain_start(&init, sigma_max, job.pure_noise_start, &mut noise);
    let mut trace = Vec::with_capacity(job.sampler.steps);
    for k in (0..job.sampler.steps).rev() {
        let (next, residual) = stepper.step(&x, k, &mut noise)?;
        x = next;
        if !x.all_finite() {
            return Err(Error::NonFinite { step: k });
        }
        trace.push(residual);
    }
    let sinogram = x.scaled(norm);
    let image = fbp(&sinogram, &job.geometry, job.filter)?;
    Ok(ReconOutput {
        image,
        sinogram,
        trace,
    })
}

/// FDM-only baseline: one full-raster PC chain with consistency, then FBP.
pub fn fdm_reconstruct(job: &ReconstructionJob) -> Result<ReconOutput> {
    job.validate()?;
    let norm = job.fdm.normalization();
    let y = job.measurement.scaled(1.0 / norm);
    let init = initialize(&y, &job.geometry)?;
    let sigma_max = job.fdm.schedule().sigma_max;
    let mut noise = NoiseSource::from_config(&job.sampler);
    let x_init = chain_start(&init, sigma_max, job.pure_noise_start, &mut noise);
    // Continue on the same stream the start draw came from.
    let out = pc_sample_with_noise(&x_init, job.fdm, (&job.acq_mask, &y), &job.sampler, noise)?;
    let sinogram = out.0.scaled(norm);
    let image = fbp(&sinogram, &job.geometry, job.filter)?;
    Ok(ReconOutput {
        image,
        sinogram,
        trace: out.1,
    })
}

/// PC loop sharing an already-advanced noise source.
fn pc_sample_with_noise(
    x_init: &Sinogram,
    model: &dyn Score,
    consistency: (&SubsampleMask, &Sinogram),
    cfg: &SamplerConfig,
    mut noise: NoiseSource,
) -> Result<(Sinogram, Vec<f64>)> {
    let grid = SigmaGrid::new(model, cfg.steps)?;
    let (mask, y) = consistency;
    let mut x = x_init.clone();
    let mut trace = Vec::with_capacity(cfg.steps);
    for k in (0..cfg.steps).rev() {
        x = predictor_step(&x, k, &grid, model, &mut noise)?;
        trace.push(acquired_residual(&x, y, mask));
        x = data_consistency(&x, y, mask, cfg.dc_lambda)?;
        for _ in 0..cfg.corrector_steps {
            let eps = epsilon_schedule(k, cfg.snr, &grid, model, &x, &mut noise);
            x = corrector_step(&x, k, &grid, model, eps, &mut noise)?;
            x = data_consistency(&x, y, mask, cfg.dc_lambda)?;
        }
        if !x.all_finite() {
            return Err(Error::NonFinite { step: k });
        }
    }
    Ok((x, trace))
}

/// SDM-only comparison path (the alternation without its FDM arm): one
/// full-raster PC chain with consistency, driven by the mask-trained SDM,
/// then FBP. The SDM prior is mismatched on unmasked rasters, which is the
/// point of the ablation.
pub fn sdm_reconstruct(job: &ReconstructionJob) -> Result<ReconOutput> {
    job.validate()?;
    let sdm = job
        .sdm
        .ok_or_else(|| Error::Mask("SDM reconstruction needs an SDM".into()))?;
    let norm = sdm.normalization();
    let y = job.measurement.scaled(1.0 / norm);
    let init = initialize(&y, &job.geometry)?;
    let sigma_max = sdm.schedule().sigma_max;
    let mut noise = NoiseSource::from_config(&job.sampler);
    let x_init = chain_start(&init, sigma_max, job.pure_noise_start, &mut noise);
    let out = pc_sample_with_noise(&x_init, sdm, (&job.acq_mask, &y), &job.sampler, noise)?;
    let sinogram = out.0.scaled(norm);
    let image = fbp(&sinogram, &job.geometry, job.filter)?;
    Ok(ReconOutput {
        image,
        sinogram,
        trace: out.1,
    })
}

/// Direct FBP of the compact measurement on its sparse-view geometry.
pub fn fbp_baseline(
    measurement: &Sinogram,
    acq_mask: &SubsampleMask,
    geometry: &FanGeometry,
    filter: FilterKind,
) -> Result<ImageGrid> {
    let sparse_geom = geometry.with_view_subset(&acq_mask.kept_view_indices)?;
    fbp(measurement, &sparse_geom, filter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: String,
    pub views: usize,
    /// SDM mask size for rows that use an SDM.
    pub sdm_mask_views: Option<usize>,
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// CSV in the metrics-table layout: method, views, mask, PSNR, SSIM,
    /// MSE in 1e-3 units.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,views,sdm_mask_views,psnr_db,ssim,mse_x1e3\n");
        for r in &self.rows {
            let mask = r
                .sdm_mask_views
                .map(|v| v.to_string())
                .unwrap_or_else(|| "none".into());
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4}\n",
                r.method,
                r.views,
                mask,
                r.psnr,
                r.ssim,
                r.mse * 1e3
            ));
        }
        out
    }
}

/// One phantom with its full-view sinogram.
pub struct AblationCase {
    pub phantom: ImageGrid,
    pub full_sinogram: Sinogram,
}

impl AblationCase {
    pub fn from_phantom(phantom: ImageGrid, geometry: &FanGeometry) -> Result<Self> {
        let full_sinogram = forward_project(&phantom, geometry)?;
        Ok(AblationCase {
            phantom,
            full_sinogram,
        })
    }
}

/// Ablation grid (FBP / FDM-only / SDM-only / MSDiff per acquired view
/// count) plus an SDM mask-size sweep at the sparsest count. Metrics are
/// averaged over the cases.
#[allow(clippy::too_many_arguments)]
pub fn ablation_sweep(
    cases: &[AblationCase],
    geometry: &FanGeometry,
    fdm: &dyn Score,
    main_sdm: (usize, &dyn Score),
    sweep_sdms: &[(usize, &dyn Score)],
    acq_view_counts: &[usize],
    sampler: &SamplerConfig,
    filter: FilterKind,
) -> Result<AblationReport> {
    if cases.is_empty() || acq_view_counts.is_empty() {
        return Err(Error::InvalidSize(
            "ablation needs at least one case and one view count".into(),
        ));
    }
    let total_views = geometry.views();
    let mut report = AblationReport::default();
    let (main_mask_views, main_model) = main_sdm;

    let mut run_block =
        |method: &str, views: usize, sdm: Option<(usize, &dyn Score)>| -> Result<()> {
            let acq_mask = SubsampleMask::equidistant(total_views, views)?;
            let sdm_mask_views = sdm.map(|(v, _)| v);
            let mut sums = (0.0f64, 0.0f64, 0.0f64);
            for (idx, case) in cases.iter().enumerate() {
                let measurement = extract_sparse(&case.full_sinogram, &acq_mask)?;
                let seed = substream_seed(
                    sampler.seed,
                    &format!("{method}-{views}-{}-{idx}", sdm_mask_views.unwrap_or(0)),
                );
                let job = ReconstructionJob {
                    measurement,
                    acq_mask: acq_mask.clone(),
                    sdm_mask: match sdm {
                        Some((v, _)) => SubsampleMask::equidistant(total_views, v)?,
                        None => acq_mask.clone(),
                    },
                    fdm,
                    sdm: sdm.map(|(_, m)| m),
                    sampler: SamplerConfig {
                        seed,
                        ..sampler.clone()
                    },
                    geometry: geometry.clone(),
                    pure_noise_start: false,
                    filter,
                };
                let image = match method {
                    "fbp" => fbp_baseline(&job.measurement, &acq_mask, geometry, filter)?,
                    "fdm" => fdm_reconstruct(&job)?.image,
                    "sdm" => sdm_reconstruct(&job)?.image,
                    "msdiff" => msdiff_reconstruct(&job)?.image,
                    other => return Err(Error::Domain(format!("unknown method {other}"))),
                };
                let m = metrics::report(&image, &case.phantom, None)?;
                sums.0 += m.psnr;
                sums.1 += m.ssim;
                sums.2 += m.mse;
            }
            let n = cases.len() as f64;
            report.rows.push(AblationRow {
                method: method.to_string(),
                views,
                sdm_mask_views,
                psnr: sums.0 / n,
                ssim: sums.1 / n,
                mse: sums.2 / n,
            });
            Ok(())
        };

    for &views in acq_view_counts {
        run_block("fbp", views, None)?;
        run_block("fdm", views, None)?;
        run_block("sdm", views, Some((main_mask_views, main_model)))?;
        run_block("msdiff", views, Some((main_mask_views, main_model)))?;
    }
    let sparsest = *acq_view_counts.iter().min().expect("nonempty");
    for &(mask_views, model) in sweep_sdms {
        run_block("msdiff", sparsest, Some((mask_views, model)))?;
    }
    Ok(report)
}
