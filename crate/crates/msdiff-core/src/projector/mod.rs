//! Fan-beam system model: ray-driven forward projection, its exact adjoint,
//! and filtered back-projection.

mod fbp;
mod siddon;

pub use fbp::{fbp, FilterKind};

use crate::error::{Error, Result};
use crate::geometry::FanGeometry;
use crate::raster::{ImageGrid, Sinogram};
use rayon::prelude::*;
use siddon::trace_ray;

/// Number of partial buffers used for the adjoint reduction. Fixed so the
/// summation order (and therefore the bits) never depends on worker count.
const ADJOINT_CHUNKS: usize = 16;

fn check_image(image: &ImageGrid, geom: &FanGeometry) -> Result<()> {
    if image.width != geom.image_side || image.height != geom.image_side {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} does not match geometry side {}",
            image.width, image.height, geom.image_side
        )));
    }
    if (image.pixel_size - geom.pixel_size).abs() > 1e-12 * geom.pixel_size {
        return Err(Error::DimensionMismatch(format!(
            "image pixel size {} != geometry pixel size {}",
            image.pixel_size, geom.pixel_size
        )));
    }
    Ok(())
}

fn check_sinogram(sino: &Sinogram, geom: &FanGeometry) -> Result<()> {
    if sino.views != geom.views() || sino.detectors != geom.detector_count {
        return Err(Error::DimensionMismatch(format!(
            "sinogram {}x{} does not match geometry {}x{}",
            sino.views,
            sino.detectors,
            geom.views(),
            geom.detector_count
        )));
    }
    Ok(())
}

/// Line integrals of the image along every (view, detector) ray.
pub fn forward_project(image: &ImageGrid, geom: &FanGeometry) -> Result<Sinogram> {
    check_image(image, geom)?;
    let n = geom.image_side;
    let half = 0.5 * n as f64 * geom.pixel_size;
    let mut sino = Sinogram::zeros(geom.views(), geom.detector_count);
    let dets = geom.detector_count;
    sino.values
        .par_chunks_mut(dets)
        .zip(geom.view_angles.par_iter())
        .for_each(|(row, &angle)| {
            let src = geom.source_position(angle);
            for (d, out) in row.iter_mut().enumerate() {
                let dst = geom.detector_position(angle, d);
                let mut acc = 0.0;
                trace_ray(src, dst, n, geom.pixel_size, -half, -half, |ix, iy, len| {
                    acc += len * image.values[iy * n + ix];
                });
                *out = acc;
            }
        });
    Ok(sino)
}

/// Exact adjoint of [`forward_project`]: accumulates `len * sino[ray]` into
/// every pixel each ray crosses.
pub fn back_project(sino: &Sinogram, geom: &FanGeometry) -> Result<ImageGrid> {
    check_sinogram(sino, geom)?;
    let n = geom.image_side;
    let half = 0.5 * n as f64 * geom.pixel_size;
    let views = geom.views();
    let chunks = ADJOINT_CHUNKS.min(views).max(1);
    let per_chunk = views.div_ceil(chunks);

    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut img = vec![0.0f64; n * n];
            let lo = c * per_chunk;
            let hi = ((c + 1) * per_chunk).min(views);
            for v in lo..hi {
                let angle = geom.view_angles[v];
                let src = geom.source_position(angle);
                for d in 0..geom.detector_count {
                    let value = sino.at(v, d);
                    if value == 0.0 {
                        continue;
                    }
                    let dst = geom.detector_position(angle, d);
                    trace_ray(src, dst, n, geom.pixel_size, -half, -half, |ix, iy, len| {
                        img[iy * n + ix] += len * value;
                    });
                }
            }
            img
        })
        .collect();

    let mut out = ImageGrid::zeros(n, geom.pixel_size);
    for partial in partials {
        for (o, p) in out.values.iter_mut().zip(partial) {
            *o += p;
        }
    }
    Ok(out)
}

/// Explicit system matrix, one row per (view, detector) ray in row-major ray
/// order, one column per pixel. Verification oracle; guarded to small grids.
pub fn dense_system_matrix(geom: &FanGeometry) -> Result<Vec<Vec<f64>>> {
    let n = geom.image_side;
    if n > 32 {
        return Err(Error::InvalidSize(format!(
            "dense system matrix limited to n <= 32, got {n}"
        )));
    }
    let half = 0.5 * n as f64 * geom.pixel_size;
    let mut rows = Vec::with_capacity(geom.views() * geom.detector_count);
    for &angle in &geom.view_angles {
        let src = geom.source_position(angle);
        for d in 0..geom.detector_count {
            let dst = geom.detector_position(angle, d);
            let mut row = vec![0.0f64; n * n];
            trace_ray(src, dst, n, geom.pixel_size, -half, -half, |ix, iy, len| {
                row[iy * n + ix] += len;
            });
            rows.push(row);
        }
    }
    Ok(rows)
}
