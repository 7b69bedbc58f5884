//! Small residual convolutional score network.
//!
//! Four 3x3 conv layers (1 -> C -> C -> C -> 1) with SiLU activations, one
//! residual join, and the noise level injected as a per-channel scale
//! computed from a sinusoidal embedding of `log sigma`.
//!
//! The conv core sits inside a scale-preconditioned denoiser
//! `D(x) = c_skip x + c_out F(c_in x, sigma)` with
//! `c_in = 1/sqrt(sigma^2 + s^2)`, `c_skip = s^2/(sigma^2 + s^2)`,
//! `c_out = sigma s / sqrt(sigma^2 + s^2)` for a data scale `s`. The core
//! then always sees unit-scale inputs and learns a unit-scale target over
//! the whole noise range; the score is `(D(x) - x)/sigma^2`. Forward and
//! backward passes are written out directly; the parameter vector stays
//! flat so optimizers and checkpoints treat it as one array.

use super::{NoiseSchedule, Score};
use crate::error::{Error, Result};
use crate::raster::Sinogram;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreNetConfig {
    /// Hidden channel count of the three interior convolutions.
    pub channels: usize,
    /// Sinusoidal embedding width (even).
    pub emb_features: usize,
    /// Assumed data scale `s` of the preconditioner.
    pub data_sigma: f64,
}

impl Default for ScoreNetConfig {
    fn default() -> Self {
        ScoreNetConfig {
            channels: 32,
            emb_features: 32,
            data_sigma: 0.5,
        }
    }
}

impl ScoreNetConfig {
    pub fn param_count(&self) -> usize {
        let c = self.channels;
        let e = self.emb_features;
        // t_w, t_b, w_in, b_in, w_a, b_a, w_b, b_b, w_out, b_out
        c * e + c + c * 9 + c + c * c * 9 + c + c * c * 9 + c + c * 9 + 1
    }
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    t_w: usize,
    t_b: usize,
    w_in: usize,
    b_in: usize,
    w_a: usize,
    b_a: usize,
    w_b: usize,
    b_b: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &ScoreNetConfig) -> Layout {
        let c = cfg.channels;
        let e = cfg.emb_features;
        let t_w = 0;
        let t_b = t_w + c * e;
        let w_in = t_b + c;
        let b_in = w_in + c * 9;
        let w_a = b_in + c;
        let b_a = w_a + c * c * 9;
        let w_b = b_a + c;
        let b_b = w_b + c * c * 9;
        let w_out = b_b + c;
        let b_out = w_out + c * 9;
        Layout {
            t_w,
            t_b,
            w_in,
            b_in,
            w_a,
            b_a,
            w_b,
            b_b,
            w_out,
            b_out,
            total: b_out + 1,
        }
    }
}

#[inline]
fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

#[inline]
fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Sinusoidal features of log sigma with geometric frequencies.
fn embed(log_sigma: f64, width: usize) -> Vec<f64> {
    let pairs = width / 2;
    let (f_min, f_max) = (0.05f64, 10.0f64);
    let mut out = Vec::with_capacity(width);
    for j in 0..pairs {
        let frac = if pairs > 1 {
            j as f64 / (pairs - 1) as f64
        } else {
            0.0
        };
        let freq = f_min * (f_max / f_min).powf(frac);
        out.push((freq * log_sigma).sin());
        out.push((freq * log_sigma).cos());
    }
    out
}

/// `out[oc] = bias[oc] + sum_ic conv3x3(input[ic], w[oc][ic])`, zero padded.
fn conv3x3(
    input: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let plane = h * w;
    out.par_chunks_mut(plane).enumerate().for_each(|(oc, dst)| {
        dst.fill(bias[oc]);
        for ic in 0..in_ch {
            let src = &input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * in_ch + ic) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wgt = weights[wbase + ky * 3 + kx];
                    if wgt == 0.0 {
                        continue;
                    }
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize) as usize;
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..h {
                        let iy = y as isize + dy;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * w..];
                        let dst_row = &mut dst[y * w..(y + 1) * w];
                        for x in x_lo..x_hi {
                            dst_row[x] += wgt * src_row[(x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    });
}

/// Input gradient of `conv3x3`: correlation of the output gradient with the
/// flipped kernels, accumulated over output channels.
fn conv3x3_input_grad(
    gout: &[f64],
    out_ch: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    in_ch: usize,
    gin: &mut [f64],
) {
    let plane = h * w;
    gin.par_chunks_mut(plane).enumerate().for_each(|(ic, dst)| {
        dst.fill(0.0);
        for oc in 0..out_ch {
            let src = &gout[oc * plane..(oc + 1) * plane];
            let wbase = (oc * in_ch + ic) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    // Flipped taps relative to the forward pass.
                    let wgt = weights[wbase + ky * 3 + kx];
                    if wgt == 0.0 {
                        continue;
                    }
                    let dy = 1 - ky as isize;
                    let dx = 1 - kx as isize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize) as usize;
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..h {
                        let iy = y as isize + dy;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * w..];
                        let dst_row = &mut dst[y * w..(y + 1) * w];
                        for x in x_lo..x_hi {
                            dst_row[x] += wgt * src_row[(x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    });
}

/// Weight and bias gradients of `conv3x3`, accumulated into `gw`/`gb`.
fn conv3x3_param_grad(
    gout: &[f64],
    out_ch: usize,
    input: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let plane = h * w;
    for oc in 0..out_ch {
        let g = &gout[oc * plane..(oc + 1) * plane];
        gb[oc] += g.iter().sum::<f64>();
        for ic in 0..in_ch {
            let src = &input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * in_ch + ic) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize) as usize;
                    if x_lo >= x_hi {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in 0..h {
                        let iy = y as isize + dy;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * w..];
                        let g_row = &g[y * w..(y + 1) * w];
                        for x in x_lo..x_hi {
                            acc += g_row[x] * src_row[(x as isize + dx) as usize];
                        }
                    }
                    gw[wbase + ky * 3 + kx] += acc;
                }
            }
        }
    }
}


/// Adjacent weight+bias gradient blocks as two disjoint mutable slices.
fn weight_bias_grads(grads: &mut [f64], w_lo: usize, w_len: usize, b_len: usize) -> (&mut [f64], &mut [f64]) {
    grads[w_lo..w_lo + w_len + b_len].split_at_mut(w_len)
}

/// Intermediate activations retained for the backward pass.
pub(crate) struct Tape {
    h: usize,
    w: usize,
    /// d score / d core-output: `c_out / sigma^2`.
    out_factor: f64,
    emb: Vec<f64>,
    scale: Vec<f64>,
    /// Preconditioned input `c_in * x` fed to the core.
    x: Vec<f64>,
    pre_in: Vec<f64>,
    act_in: Vec<f64>,
    h0: Vec<f64>,
    pre_a: Vec<f64>,
    h1: Vec<f64>,
    pre_b: Vec<f64>,
    h2: Vec<f64>,
}

/// Trained (or initialized) score model with a flat parameter vector.
#[derive(Debug, Clone)]
pub struct ScoreNet {
    pub config: ScoreNetConfig,
    pub schedule: NoiseSchedule,
    /// Dataset maximum used to normalize training data.
    pub normalization: f64,
    params: Vec<f64>,
}

impl ScoreNet {
    /// Kaiming-style random initialization.
    pub fn init<R: Rng>(config: ScoreNetConfig, schedule: NoiseSchedule, rng: &mut R) -> Result<Self> {
        if config.channels == 0 || config.emb_features == 0 || config.emb_features % 2 != 0 {
            return Err(Error::InvalidSize(
                "channels must be positive and emb_features a positive even number".into(),
            ));
        }
        let layout = Layout::new(&config);
        let mut params = vec![0.0f64; layout.total];
        let c = config.channels;
        let e = config.emb_features;
        let mut fill = |lo: usize, len: usize, std: f64, rng: &mut R| {
            for p in &mut params[lo..lo + len] {
                let z: f64 = rng.sample(StandardNormal);
                *p = std * z;
            }
        };
        fill(layout.t_w, c * e, 1.0 / (e as f64).sqrt(), rng);
        fill(layout.w_in, c * 9, (2.0 / 9.0f64).sqrt(), rng);
        fill(layout.w_a, c * c * 9, (2.0 / (9.0 * c as f64)).sqrt(), rng);
        fill(layout.w_b, c * c * 9, (2.0 / (9.0 * c as f64)).sqrt(), rng);
        fill(layout.w_out, c * 9, (2.0 / (9.0 * c as f64)).sqrt(), rng);
        Ok(ScoreNet {
            config,
            schedule,
            normalization: 1.0,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Forward pass retaining the activation tape.
    pub(crate) fn forward_tape(&self, x: &Sinogram, sigma: f64) -> (Sinogram, Tape) {
        let (h, w) = (x.views, x.detectors);
        let plane = h * w;
        let c = self.config.channels;
        let lay = self.layout();
        let p = &self.params;
        // The model is never trained below sigma_min; clamp rather than
        // divide by zero.
        let sigma = sigma.max(self.schedule.sigma_min);
        let s2 = self.config.data_sigma * self.config.data_sigma;
        let var = sigma * sigma + s2;
        let c_in = 1.0 / var.sqrt();
        let c_out = sigma * self.config.data_sigma / var.sqrt();
        let out_factor = c_out / (sigma * sigma);
        let u: Vec<f64> = x.values.iter().map(|&a| c_in * a).collect();

        let emb = embed(sigma.ln(), self.config.emb_features);
        let e = emb.len();
        let mut scale = vec![0.0f64; c];
        for ch in 0..c {
            let row = &p[lay.t_w + ch * e..lay.t_w + (ch + 1) * e];
            scale[ch] = p[lay.t_b + ch]
                + row.iter().zip(&emb).map(|(a, b)| a * b).sum::<f64>();
        }

        let mut pre_in = vec![0.0f64; c * plane];
        conv3x3(
            &u,
            1,
            h,
            w,
            &p[lay.w_in..lay.w_in + c * 9],
            &p[lay.b_in..lay.b_in + c],
            &mut pre_in,
        );
        let act_in: Vec<f64> = pre_in.iter().map(|&v| silu(v)).collect();
        let mut h0 = act_in.clone();
        for ch in 0..c {
            let factor = 1.0 + scale[ch];
            for v in &mut h0[ch * plane..(ch + 1) * plane] {
                *v *= factor;
            }
        }

        let mut pre_a = vec![0.0f64; c * plane];
        conv3x3(
            &h0,
            c,
            h,
            w,
            &p[lay.w_a..lay.w_a + c * c * 9],
            &p[lay.b_a..lay.b_a + c],
            &mut pre_a,
        );
        let h1: Vec<f64> = pre_a.iter().map(|&v| silu(v)).collect();

        let mut pre_b = vec![0.0f64; c * plane];
        conv3x3(
            &h1,
            c,
            h,
            w,
            &p[lay.w_b..lay.w_b + c * c * 9],
            &p[lay.b_b..lay.b_b + c],
            &mut pre_b,
        );
        let mut h2: Vec<f64> = pre_b.iter().map(|&v| silu(v)).collect();
        for (a, b) in h2.iter_mut().zip(&h0) {
            *a += b;
        }

        let mut head = vec![0.0f64; plane];
        conv3x3(
            &h2,
            c,
            h,
            w,
            &p[lay.w_out..lay.w_out + c * 9],
            &p[lay.b_out..lay.b_out + 1],
            &mut head,
        );
        // score = (D(x) - x)/sigma^2 = -x/var + (c_out/sigma^2) F.
        let values: Vec<f64> = x
            .values
            .iter()
            .zip(&head)
            .map(|(&xv, &f)| -xv / var + out_factor * f)
            .collect();
        let out = Sinogram {
            views: h,
            detectors: w,
            values,
        };
        let tape = Tape {
            h,
            w,
            out_factor,
            emb,
            scale,
            x: u,
            pre_in,
            act_in,
            h0,
            pre_a,
            h1,
            pre_b,
            h2,
        };
        (out, tape)
    }

    /// Parameter gradient for an output cotangent `gout`, accumulated into
    /// `grads` (same layout as the parameter vector).
    pub(crate) fn backward(&self, tape: &Tape, gout: &[f64], grads: &mut [f64]) {
        let (h, w) = (tape.h, tape.w);
        let plane = h * w;
        let c = self.config.channels;
        let e = self.config.emb_features;
        let lay = self.layout();
        let p = &self.params;

        // Head: score = -x/var + out_factor * (conv_out(h2) + b_out).
        let g_head: Vec<f64> = gout.iter().map(|&g| g * tape.out_factor).collect();
        {
            let (gw, gb) = weight_bias_grads(grads, lay.w_out, c * 9, 1);
            conv3x3_param_grad(&g_head, 1, &tape.h2, c, h, w, gw, gb);
        }
        let mut g_h2 = vec![0.0f64; c * plane];
        conv3x3_input_grad(
            &g_head,
            1,
            h,
            w,
            &p[lay.w_out..lay.w_out + c * 9],
            c,
            &mut g_h2,
        );

        // h2 = silu(pre_b) + h0.
        let g_h0_res = g_h2.clone();
        let mut g_pre_b = g_h2;
        for (g, &pre) in g_pre_b.iter_mut().zip(&tape.pre_b) {
            *g *= silu_prime(pre);
        }
        {
            let (gw, gb) = weight_bias_grads(grads, lay.w_b, c * c * 9, c);
            conv3x3_param_grad(&g_pre_b, c, &tape.h1, c, h, w, gw, gb);
        }
        let mut g_h1 = vec![0.0f64; c * plane];
        conv3x3_input_grad(
            &g_pre_b,
            c,
            h,
            w,
            &p[lay.w_b..lay.w_b + c * c * 9],
            c,
            &mut g_h1,
        );

        // h1 = silu(pre_a).
        let mut g_pre_a = g_h1;
        for (g, &pre) in g_pre_a.iter_mut().zip(&tape.pre_a) {
            *g *= silu_prime(pre);
        }
        {
            let (gw, gb) = weight_bias_grads(grads, lay.w_a, c * c * 9, c);
            conv3x3_param_grad(&g_pre_a, c, &tape.h0, c, h, w, gw, gb);
        }
        let mut g_h0 = vec![0.0f64; c * plane];
        conv3x3_input_grad(
            &g_pre_a,
            c,
            h,
            w,
            &p[lay.w_a..lay.w_a + c * c * 9],
            c,
            &mut g_h0,
        );
        for (a, b) in g_h0.iter_mut().zip(&g_h0_res) {
            *a += b;
        }

        // h0 = silu(pre_in) * (1 + scale[ch]).
        let mut g_act_in = g_h0;
        for ch in 0..c {
            let factor = 1.0 + tape.scale[ch];
            let mut ds = 0.0;
            for (g, &a) in g_act_in[ch * plane..(ch + 1) * plane]
                .iter_mut()
                .zip(&tape.act_in[ch * plane..(ch + 1) * plane])
            {
                ds += *g * a;
                *g *= factor;
            }
            // scale[ch] = t_b[ch] + t_w[ch] . emb
            grads[lay.t_b + ch] += ds;
            for (gw, &ev) in grads[lay.t_w + ch * e..lay.t_w + (ch + 1) * e]
                .iter_mut()
                .zip(&tape.emb)
            {
                *gw += ds * ev;
            }
        }
        let mut g_pre_in = g_act_in;
        for (g, &pre) in g_pre_in.iter_mut().zip(&tape.pre_in) {
            *g *= silu_prime(pre);
        }
        {
            let (gw, gb) = weight_bias_grads(grads, lay.w_in, c * 9, c);
            conv3x3_param_grad(&g_pre_in, c, &tape.x, 1, h, w, gw, gb);
        }
    }
}

impl Score for ScoreNet {
    fn eval(&self, x: &Sinogram, sigma: f64) -> Sinogram {
        self.forward_tape(x, sigma).0
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn normalization(&self) -> f64 {
        self.normalization
    }
}

const CKPT_MAGIC: &[u8; 8] = b"MSDFCKP1";

/// Write a checkpoint: header (kind tag, architecture, schedule,
/// normalization) followed by the flat little-endian f64 parameters.
pub fn save_checkpoint(path: impl AsRef<Path>, net: &ScoreNet, kind: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CKPT_MAGIC)?;
    let mut tag = [0u8; 8];
    for (t, b) in tag.iter_mut().zip(kind.bytes()) {
        *t = b;
    }
    w.write_all(&tag)?;
    w.write_all(&(net.config.channels as u32).to_le_bytes())?;
    w.write_all(&(net.config.emb_features as u32).to_le_bytes())?;
    w.write_all(&net.config.data_sigma.to_le_bytes())?;
    w.write_all(&net.schedule.sigma_min.to_le_bytes())?;
    w.write_all(&net.schedule.sigma_max.to_le_bytes())?;
    w.write_all(&(net.schedule.steps as u32).to_le_bytes())?;
    w.write_all(&net.normalization.to_le_bytes())?;
    w.write_all(&(net.params.len() as u64).to_le_bytes())?;
    for &p in &net.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint back; returns the model and its kind tag.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ScoreNet, String)> {
    let mut r = BufReader::new(
        File::open(path.as_ref()).map_err(|_| {
            Error::MissingCheckpoint(path.as_ref().display().to_string())
        })?,
    );
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    if &magic != CKPT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let mut tag = [0u8; 8];
    r.read_exact(&mut tag)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    let kind = String::from_utf8_lossy(&tag)
        .trim_end_matches('\0')
        .to_string();
    let mut u32buf = [0u8; 4];
    let mut f64buf = [0u8; 8];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        r.read_exact(&mut u32buf)
            .map_err(|_| Error::Format("truncated checkpoint".into()))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let channels = read_u32(&mut r)? as usize;
    let emb_features = read_u32(&mut r)? as usize;
    let mut read_f64 = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut f64buf)
            .map_err(|_| Error::Format("truncated checkpoint".into()))?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let data_sigma = read_f64(&mut r)?;
    let sigma_min = read_f64(&mut r)?;
    let sigma_max = read_f64(&mut r)?;
    let mut u32buf2 = [0u8; 4];
    r.read_exact(&mut u32buf2)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    let steps = u32::from_le_bytes(u32buf2) as usize;
    let normalization = read_f64(&mut r)?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let config = ScoreNetConfig {
        channels,
        emb_features,
        data_sigma,
    };
    if count != config.param_count() {
        return Err(Error::Format(format!(
            "checkpoint has {count} parameters, architecture needs {}",
            config.param_count()
        )));
    }
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Format("truncated checkpoint payload".into()))?;
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let schedule = NoiseSchedule::new(sigma_min, sigma_max, steps)?;
    Ok((
        ScoreNet {
            config,
            schedule,
            normalization,
            params,
        },
        kind,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(seed: u64) -> ScoreNet {
        let mut rng = crate::rng::seeded(seed);
        ScoreNet::init(
            ScoreNetConfig {
                channels: 3,
                emb_features: 8,
                data_sigma: 0.5,
            },
            NoiseSchedule::new(0.01, 10.0, 100).unwrap(),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        let net = tiny_net(1);
        assert_eq!(net.param_count(), net.config.param_count());
        assert_eq!(net.param_count(), 253);
    }

    #[test]
    fn output_shape_matches_input_and_is_deterministic() {
        let net = tiny_net(2);
        let mut rng = crate::rng::seeded(3);
        let x = Sinogram::standard_normal(16, 9, &mut rng);
        let a = net.eval(&x, 0.5);
        let b = net.eval(&x, 0.5);
        assert_eq!(a.views, 16);
        assert_eq!(a.detectors, 9);
        assert_eq!(a.values, b.values);
        let c = net.eval(&x, 2.0);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut rng = crate::rng::seeded(1);
        let sched = NoiseSchedule::new(0.01, 10.0, 10).unwrap();
        assert!(ScoreNet::init(
            ScoreNetConfig {
                channels: 0,
                emb_features: 8,
                data_sigma: 0.5
            },
            sched.clone(),
            &mut rng
        )
        .is_err());
        assert!(ScoreNet::init(
            ScoreNetConfig {
                channels: 4,
                emb_features: 7,
                data_sigma: 0.5
            },
            sched,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn checkpoint_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut net = tiny_net(5);
        net.normalization = 3.25;
        save_checkpoint(&path, &net, "sdm").unwrap();
        let (back, kind) = load_checkpoint(&path).unwrap();
        assert_eq!(kind, "sdm");
        assert_eq!(back.params(), net.params());
        assert_eq!(back.normalization, 3.25);
        assert_eq!(back.config, net.config);
        assert_eq!(back.schedule, net.schedule);

        let mut rng = crate::rng::seeded(9);
        let x = Sinogram::standard_normal(8, 8, &mut rng);
        assert_eq!(net.eval(&x, 1.0).values, back.eval(&x, 1.0).values);
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        match load_checkpoint("/nonexistent/x.ckpt") {
            Err(crate::Error::MissingCheckpoint(_)) => {}
            other => panic!("expected MissingCheckpoint, got {other:?}"),
        }
    }
}
