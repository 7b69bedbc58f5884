//! Subcommand implementations.

use crate::config::ExperimentConfig;
use crate::manifest;
use anyhow::{bail, Context, Result};
use msdiff_core::diffusion::{
    load_checkpoint, save_checkpoint, trace_to_csv, train_score_model, Score, ScoreNet,
};
use msdiff_core::metrics::{self, extract_profile, profiles_to_csv, ProfileAxis};
use msdiff_core::phantom::{add_poisson_noise, random_phantom, NoiseSpec};
use msdiff_core::pipeline::{
    ablation_sweep, fbp_baseline, fdm_reconstruct, msdiff_reconstruct, sdm_reconstruct,
    AblationCase, ReconstructionJob,
};
use msdiff_core::projector::forward_project;
use msdiff_core::raster::{ImageGrid, Sinogram};
use msdiff_core::rasterio;
use msdiff_core::rng::substream_seed;
use msdiff_core::sinogram_ops::{extract_sparse, SubsampleMask};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct Ctx {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub quiet: bool,
    /// Base directory all relative paths resolve against.
    pub base_dir: PathBuf,
}

impl Ctx {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.dataset_dir)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.checkpoint_dir)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output_dir)
    }

    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn manifest_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        manifest::write_and_verify(dir, &self.config_hash, self.config.seed)
    }
}

fn phantom_image_path(dir: &Path, split: &str, idx: usize) -> PathBuf {
    dir.join(format!("{split}_{idx:03}.img"))
}

fn phantom_spec_path(dir: &Path, split: &str, idx: usize) -> PathBuf {
    dir.join(format!("{split}_{idx:03}.spec.txt"))
}

fn sinogram_path(dir: &Path, split: &str, idx: usize) -> PathBuf {
    dir.join(format!("{split}_{idx:03}.sino"))
}

fn sdm_checkpoint_path(dir: &Path, sdm_views: usize) -> PathBuf {
    dir.join(format!("sdm_{sdm_views}v.ckpt"))
}

/// Generate the random phantom dataset (images and ellipse specs).
pub fn cmd_phantom(ctx: &Ctx) -> Result<()> {
    let dir = ctx.dataset_dir();
    std::fs::create_dir_all(&dir)?;
    ctx.manifest_into(&dir)?;
    let cfg = &ctx.config;
    for (split, count) in [
        ("train", cfg.dataset.train_phantoms),
        ("test", cfg.dataset.test_phantoms),
    ] {
        for idx in 0..count {
            let seed = substream_seed(cfg.seed, &format!("phantom-{split}-{idx}"));
            let (spec, grid) = random_phantom(cfg.geometry.image_size, cfg.dataset.ellipses, seed)?;
            rasterio::save_image(phantom_image_path(&dir, split, idx), &grid)?;
            std::fs::write(phantom_spec_path(&dir, split, idx), spec.to_text())?;
        }
        ctx.say(&format!("wrote {count} {split} phantoms to {}", dir.display()));
    }
    Ok(())
}

/// Forward-project every phantom, optionally adding Poisson noise.
pub fn cmd_project(ctx: &Ctx) -> Result<()> {
    let dir = ctx.dataset_dir();
    ctx.manifest_into(&dir)?;
    let cfg = &ctx.config;
    let geom = cfg.fan_geometry()?;
    for (split, count) in [
        ("train", cfg.dataset.train_phantoms),
        ("test", cfg.dataset.test_phantoms),
    ] {
        for idx in 0..count {
            let img_path = phantom_image_path(&dir, split, idx);
            if !img_path.exists() {
                bail!(
                    "missing phantom {} (run the phantom command first)",
                    img_path.display()
                );
            }
            let grid = rasterio::load_image(&img_path)?;
            let mut sino = forward_project(&grid, &geom)?;
            if cfg.dataset.noise_enabled {
                let noise = NoiseSpec {
                    enabled: true,
                    incident_photons: cfg.dataset.incident_photons,
                    rng_seed: substream_seed(cfg.seed, &format!("noise-{split}-{idx}")),
                };
                sino = add_poisson_noise(&sino, &noise)?;
            }
            rasterio::save_sinogram(sinogram_path(&dir, split, idx), &sino)?;
        }
        ctx.say(&format!("projected {count} {split} sinograms"));
    }
    Ok(())
}

fn load_split_sinograms(ctx: &Ctx, split: &str, count: usize) -> Result<Vec<Sinogram>> {
    let dir = ctx.dataset_dir();
    (0..count)
        .map(|idx| {
            let path = sinogram_path(&dir, split, idx);
            if !path.exists() {
                bail!(
                    "missing sinogram {} (run the project command first)",
                    path.display()
                );
            }
            Ok(rasterio::load_sinogram(&path)?)
        })
        .collect()
}

fn load_split_phantoms(ctx: &Ctx, split: &str, count: usize) -> Result<Vec<ImageGrid>> {
    let dir = ctx.dataset_dir();
    (0..count)
        .map(|idx| {
            let path = phantom_image_path(&dir, split, idx);
            if !path.exists() {
                bail!("missing phantom {}", path.display());
            }
            Ok(rasterio::load_image(&path)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWhich {
    Fdm,
    Sdm,
}

/// Train and checkpoint one score model.
pub fn cmd_train(ctx: &Ctx, which: TrainWhich, sdm_views_override: Option<usize>) -> Result<()> {
    let cfg = &ctx.config;
    let ckpt_dir = ctx.checkpoint_dir();
    std::fs::create_dir_all(&ckpt_dir)?;
    ctx.manifest_into(&ckpt_dir)?;
    let dataset = load_split_sinograms(ctx, "train", cfg.dataset.train_phantoms)?;
    let schedule = cfg.noise_schedule()?;

    let (mask, ckpt_path, kind, stream) = match which {
        TrainWhich::Fdm => (None, ckpt_dir.join("fdm.ckpt"), "fdm", "train-fdm".to_string()),
        TrainWhich::Sdm => {
            let sdm_views = sdm_views_override.unwrap_or(cfg.masks.sdm_views);
            if cfg.geometry.views % sdm_views != 0 {
                bail!(
                    "sdm views {sdm_views} must divide geometry.views {}",
                    cfg.geometry.views
                );
            }
            let mask = SubsampleMask::equidistant(cfg.geometry.views, sdm_views)?;
            (
                Some(mask),
                sdm_checkpoint_path(&ckpt_dir, sdm_views),
                "sdm",
                format!("train-sdm-{sdm_views}"),
            )
        }
    };

    let out = train_score_model(
        &dataset,
        mask.as_ref(),
        cfg.net_config(),
        schedule,
        &cfg.train_config(&stream),
    )?;
    save_checkpoint(&ckpt_path, &out.model, kind)?;
    let trace_path = ckpt_path.with_extension("loss.csv");
    std::fs::write(&trace_path, trace_to_csv(&out.trace))?;
    let last = out.trace.last().map(|r| r.loss).unwrap_or(f64::NAN);
    ctx.say(&format!(
        "trained {kind} ({} params) -> {} (final loss {last:.4})",
        out.model.param_count(),
        ckpt_path.display()
    ));
    Ok(())
}

fn load_fdm(ctx: &Ctx) -> Result<ScoreNet> {
    let path = ctx.checkpoint_dir().join("fdm.ckpt");
    let (model, kind) = load_checkpoint(&path)?;
    if kind != "fdm" {
        bail!("{} holds a {kind} model, expected fdm", path.display());
    }
    Ok(model)
}

fn load_sdm(ctx: &Ctx, sdm_views: usize) -> Result<ScoreNet> {
    let path = sdm_checkpoint_path(&ctx.checkpoint_dir(), sdm_views);
    let (model, kind) = load_checkpoint(&path)?;
    if kind != "sdm" {
        bail!("{} holds a {kind} model, expected sdm", path.display());
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMethod {
    Fbp,
    Fdm,
    Sdm,
    Msdiff,
}

impl ReconMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReconMethod::Fbp => "fbp",
            ReconMethod::Fdm => "fdm",
            ReconMethod::Sdm => "sdm",
            ReconMethod::Msdiff => "msdiff",
        }
    }
}

/// Reconstruct every test phantom with one method; write image, final
/// sinogram, difference image, and the residual trace.
pub fn cmd_reconstruct(ctx: &Ctx, method: ReconMethod) -> Result<()> {
    let cfg = &ctx.config;
    let out_dir = ctx.output_dir();
    std::fs::create_dir_all(&out_dir)?;
    ctx.manifest_into(&out_dir)?;
    let geom = cfg.fan_geometry()?;
    let filter = cfg.filter_kind()?;
    let acq_mask = SubsampleMask::equidistant(cfg.geometry.views, cfg.masks.acquired_views)?;
    let sdm_mask = SubsampleMask::equidistant(cfg.geometry.views, cfg.masks.sdm_views)?;
    let sinos = load_split_sinograms(ctx, "test", cfg.dataset.test_phantoms)?;
    let truths = load_split_phantoms(ctx, "test", cfg.dataset.test_phantoms)?;

    let fdm = match method {
        ReconMethod::Fbp => None,
        _ => Some(load_fdm(ctx)?),
    };
    let sdm = match method {
        ReconMethod::Sdm | ReconMethod::Msdiff => Some(load_sdm(ctx, cfg.masks.sdm_views)?),
        _ => None,
    };

    for (idx, (full, truth)) in sinos.iter().zip(&truths).enumerate() {
        let measurement = extract_sparse(full, &acq_mask)?;
        let sampler = cfg.sampler_config(&format!("sample-{}-{idx}", method.name()));
        let (image, final_sino, trace) = match method {
            ReconMethod::Fbp => {
                let image = fbp_baseline(&measurement, &acq_mask, &geom, filter)?;
                (image, None, None)
            }
            _ => {
                let fdm_ref = fdm.as_ref().expect("loaded above");
                let job = ReconstructionJob {
                    measurement: measurement.clone(),
                    acq_mask: acq_mask.clone(),
                    sdm_mask: sdm_mask.clone(),
                    fdm: fdm_ref,
                    sdm: sdm.as_ref().map(|m| m as &dyn Score),
                    sampler,
                    geometry: geom.clone(),
                    pure_noise_start: cfg.sampler.pure_noise_start,
                    filter,
                };
                let out = match method {
                    ReconMethod::Fdm => fdm_reconstruct(&job)?,
                    ReconMethod::Sdm => sdm_reconstruct(&job)?,
                    ReconMethod::Msdiff => msdiff_reconstruct(&job)?,
                    ReconMethod::Fbp => unreachable!(),
                };
                (out.image, Some(out.sinogram), Some(out.trace))
            }
        };

        let tag = format!("{}_{idx:03}", method.name());
        rasterio::save_image(out_dir.join(format!("recon_{tag}.img")), &image)?;
        let mut diff = image.clone();
        for (d, &t) in diff.values.iter_mut().zip(&truth.values) {
            *d -= t;
        }
        rasterio::save_image(out_dir.join(format!("diff_{tag}.img")), &diff)?;
        if let Some(s) = final_sino {
            rasterio::save_sinogram(out_dir.join(format!("sino_{tag}.sino")), &s)?;
        }
        if let Some(trace) = trace {
            let mut csv = String::from("iteration,acquired_residual\n");
            for (i, r) in trace.iter().enumerate() {
                let _ = writeln!(csv, "{i},{r:.9e}");
            }
            std::fs::write(out_dir.join(format!("residual_{tag}.csv")), csv)?;
        }
        let m = metrics::report(&image, truth, None)?;
        ctx.say(&format!(
            "{} phantom {idx}: PSNR {:.2} dB, SSIM {:.4}, MSE {:.3e}",
            method.name(),
            m.psnr,
            m.ssim,
            m.mse
        ));
    }
    Ok(())
}

/// Metrics CSV over every reconstruction artifact present in the output
/// directory, plus center-row profile overlays.
pub fn cmd_evaluate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let out_dir = ctx.output_dir();
    ctx.manifest_into(&out_dir)?;
    let truths = load_split_phantoms(ctx, "test", cfg.dataset.test_phantoms)?;

    let mut csv = String::from("method,views,phantom,psnr_db,ssim,mse_x1e3\n");
    let mut any = false;
    let methods = ["fbp", "fdm", "sdm", "msdiff"];
    for method in methods {
        for (idx, truth) in truths.iter().enumerate() {
            let path = out_dir.join(format!("recon_{method}_{idx:03}.img"));
            if !path.exists() {
                continue;
            }
            any = true;
            let image = rasterio::load_image(&path)?;
            let m = metrics::report(&image, truth, None)?;
            let _ = writeln!(
                csv,
                "{method},{},{idx},{:.4},{:.4},{:.4}",
                cfg.masks.acquired_views,
                m.psnr,
                m.ssim,
                m.mse * 1e3
            );
        }
    }
    if !any {
        bail!(
            "no reconstruction artifacts in {} (run the reconstruct command first)",
            out_dir.display()
        );
    }
    std::fs::write(out_dir.join("metrics.csv"), &csv)?;

    // Center-row profile overlay for the first test phantom.
    let row = cfg.geometry.image_size / 2;
    let mut labels = vec!["ground_truth"];
    let mut profiles = vec![extract_profile(&truths[0], ProfileAxis::Row(row))
        .context("profile extraction")?];
    for method in methods {
        let path = out_dir.join(format!("recon_{method}_000.img"));
        if path.exists() {
            let image = rasterio::load_image(&path)?;
            labels.push(match method {
                "fbp" => "fbp",
                "fdm" => "fdm",
                "sdm" => "sdm",
                _ => "msdiff",
            });
            profiles.push(extract_profile(&image, ProfileAxis::Row(row))?);
        }
    }
    std::fs::write(
        out_dir.join("profiles.csv"),
        profiles_to_csv(&labels, &profiles),
    )?;
    ctx.say(&format!(
        "wrote metrics.csv and profiles.csv to {}",
        out_dir.display()
    ));
    Ok(())
}

/// Full ablation grid and SDM mask sweep.
pub fn cmd_ablate(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.config;
    let out_dir = ctx.output_dir();
    std::fs::create_dir_all(&out_dir)?;
    ctx.manifest_into(&out_dir)?;
    let geom = cfg.fan_geometry()?;
    let filter = cfg.filter_kind()?;
    let truths = load_split_phantoms(ctx, "test", cfg.dataset.test_phantoms)?;
    let cases = truths
        .into_iter()
        .map(|p| Ok(AblationCase::from_phantom(p, &geom)?))
        .collect::<Result<Vec<_>>>()?;

    let fdm = load_fdm(ctx)?;
    let main_sdm = load_sdm(ctx, cfg.masks.sdm_views)?;
    let mut sweep_models = Vec::new();
    for &v in &cfg.masks.sweep_sdm_views {
        if v == cfg.masks.sdm_views {
            continue;
        }
        sweep_models.push((v, load_sdm(ctx, v)?));
    }
    let sweep_refs: Vec<(usize, &dyn Score)> = sweep_models
        .iter()
        .map(|(v, m)| (*v, m as &dyn Score))
        .collect();

    let view_counts = if cfg.masks.eval_view_counts.is_empty() {
        vec![cfg.masks.acquired_views]
    } else {
        cfg.masks.eval_view_counts.clone()
    };

    let report = ablation_sweep(
        &cases,
        &geom,
        &fdm,
        (cfg.masks.sdm_views, &main_sdm),
        &sweep_refs,
        &view_counts,
        &cfg.sampler_config("ablate"),
        filter,
    )?;
    std::fs::write(out_dir.join("ablation.csv"), report.to_csv())?;
    ctx.say(&format!(
        "wrote ablation.csv ({} rows) to {}",
        report.rows.len(),
        out_dir.display()
    ));
    Ok(())
}
