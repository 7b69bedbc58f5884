//! Denoising score-matching objective.
//!
//! For a batch of clean rasters `x0`, times `t`, and unit-Gaussian draws
//! `z`, the loss is the sigma^2-weighted residual between the model score
//! at `x0 + sigma(t) z` and the conditional kernel score `-z / sigma(t)`,
//! averaged per element and over the batch.

use super::network::ScoreNet;
use super::{perturb, Score};
use crate::error::{Error, Result};
use crate::raster::Sinogram;

fn check_batch(batch: &[Sinogram], ts: &[usize], zs: &[Sinogram]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidSize("empty batch".into()));
    }
    if batch.len() != ts.len() || batch.len() != zs.len() {
        return Err(Error::DimensionMismatch(format!(
            "batch {} / times {} / noise {} lengths differ",
            batch.len(),
            ts.len(),
            zs.len()
        )));
    }
    Ok(())
}

/// Per-item weighted residual mean: `sigma^2 * mean((S + z/sigma)^2)`.
fn item_loss(score: &Sinogram, z: &Sinogram, sigma: f64) -> f64 {
    let n = score.values.len() as f64;
    let sum: f64 = score
        .values
        .iter()
        .zip(&z.values)
        .map(|(&s, &zv)| {
            let r = s + zv / sigma;
            r * r
        })
        .sum();
    sigma * sigma * sum / n
}

/// Loss only, usable with any score model (analytic oracles included).
pub fn dsm_loss_value(
    model: &dyn Score,
    batch: &[Sinogram],
    ts: &[usize],
    zs: &[Sinogram],
) -> Result<f64> {
    check_batch(batch, ts, zs)?;
    let schedule = model.schedule().clone();
    let mut total = 0.0;
    for ((x0, &t), z) in batch.iter().zip(ts).zip(zs) {
        let sigma = schedule.sigma_at(t)?;
        let xt = perturb(x0, t, z, &schedule)?;
        let score = model.eval(&xt, sigma);
        total += item_loss(&score, z, sigma);
    }
    Ok(total / batch.len() as f64)
}

/// Loss and the exact parameter gradient for the convolutional score net.
pub fn dsm_loss(
    net: &ScoreNet,
    batch: &[Sinogram],
    ts: &[usize],
    zs: &[Sinogram],
) -> Result<(f64, Vec<f64>)> {
    check_batch(batch, ts, zs)?;
    let mut grads = vec![0.0f64; net.param_count()];
    let mut total = 0.0;
    let b = batch.len() as f64;
    for ((x0, &t), z) in batch.iter().zip(ts).zip(zs) {
        let sigma = net.schedule.sigma_at(t)?;
        let xt = perturb(x0, t, z, &net.schedule)?;
        let (score, tape) = net.forward_tape(&xt, sigma);
        total += item_loss(&score, z, sigma);
        // d loss / d score = 2 sigma^2 (S + z/sigma) / (n_elements * batch).
        let n = score.values.len() as f64;
        let coeff = 2.0 * sigma * sigma / (n * b);
        let gout: Vec<f64> = score
            .values
            .iter()
            .zip(&z.values)
            .map(|(&s, &zv)| coeff * (s + zv / sigma))
            .collect();
        net.backward(&tape, &gout, &mut grads);
    }
    Ok((total / b, grads))
}
