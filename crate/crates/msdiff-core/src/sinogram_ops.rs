//! View subsampling, sparse acquisition, view-axis interpolation, and the
//! data-consistency projection.

use crate::error::{Error, Result};
use crate::raster::Sinogram;

/// Per-view binary row mask keeping an equidistant subset of views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleMask {
    pub total_views: usize,
    /// Sorted, unique view indices that are kept.
    pub kept_view_indices: Vec<usize>,
}

impl SubsampleMask {
    /// Keep every `total_views / kept_views`-th view starting at view 0.
    pub fn equidistant(total_views: usize, kept_views: usize) -> Result<Self> {
        if kept_views == 0 || total_views == 0 {
            return Err(Error::Mask("view counts must be positive".into()));
        }
        if total_views % kept_views != 0 {
            return Err(Error::Mask(format!(
                "kept views {kept_views} must divide total views {total_views}"
            )));
        }
        let stride = total_views / kept_views;
        Ok(SubsampleMask {
            total_views,
            kept_view_indices: (0..kept_views).map(|k| k * stride).collect(),
        })
    }

    pub fn kept_count(&self) -> usize {
        self.kept_view_indices.len()
    }

    pub fn stride(&self) -> usize {
        self.total_views / self.kept_count()
    }

    pub fn is_kept(&self, view: usize) -> bool {
        view % self.stride() == 0
    }

    /// Binary rows, 1.0 on kept views.
    pub fn as_rows(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.total_views];
        for &v in &self.kept_view_indices {
            rows[v] = 1.0;
        }
        rows
    }

    /// Mask keeping exactly the complementary views.
    pub fn complement(&self) -> ComplementMask {
        ComplementMask { inner: self.clone() }
    }

    /// True if every kept view of `self` is also kept by `other`.
    pub fn is_subset_of(&self, other: &SubsampleMask) -> bool {
        self.total_views == other.total_views
            && self.kept_view_indices.iter().all(|&v| other.is_kept(v))
    }
}

/// Complement of an equidistant mask (not itself equidistant).
#[derive(Debug, Clone)]
pub struct ComplementMask {
    inner: SubsampleMask,
}

impl ComplementMask {
    pub fn is_kept(&self, view: usize) -> bool {
        !self.inner.is_kept(view)
    }
}

fn check_views(x: &Sinogram, m: &SubsampleMask) -> Result<()> {
    if x.views != m.total_views {
        return Err(Error::DimensionMismatch(format!(
            "sinogram has {} views, mask covers {}",
            x.views, m.total_views
        )));
    }
    Ok(())
}

/// Zero out the rows of every dropped view.
pub fn apply_mask(x: &Sinogram, m: &SubsampleMask) -> Result<Sinogram> {
    check_views(x, m)?;
    let mut out = Sinogram::zeros(x.views, x.detectors);
    for &v in &m.kept_view_indices {
        out.row_mut(v).copy_from_slice(x.row(v));
    }
    Ok(out)
}

/// Zero out the rows of every kept view (the complementary projection).
pub fn apply_complement(x: &Sinogram, m: &SubsampleMask) -> Result<Sinogram> {
    check_views(x, m)?;
    let mut out = x.clone();
    for &v in &m.kept_view_indices {
        out.row_mut(v).fill(0.0);
    }
    Ok(out)
}

/// Compact sparse acquisition: only the kept rows, in order.
pub fn extract_sparse(x: &Sinogram, m: &SubsampleMask) -> Result<Sinogram> {
    check_views(x, m)?;
    let mut out = Sinogram::zeros(m.kept_count(), x.detectors);
    for (k, &v) in m.kept_view_indices.iter().enumerate() {
        out.row_mut(k).copy_from_slice(x.row(v));
    }
    Ok(out)
}

/// Zero-filled expansion of a compact sinogram back to the full view grid.
pub fn expand_sparse(compact: &Sinogram, m: &SubsampleMask) -> Result<Sinogram> {
    if compact.views != m.kept_count() {
        return Err(Error::DimensionMismatch(format!(
            "compact sinogram has {} rows, mask keeps {}",
            compact.views,
            m.kept_count()
        )));
    }
    let mut out = Sinogram::zeros(m.total_views, compact.detectors);
    for (k, &v) in m.kept_view_indices.iter().enumerate() {
        out.row_mut(v).copy_from_slice(compact.row(k));
    }
    Ok(out)
}

/// Interpolate a compact sinogram up to `target_views` along the view axis.
///
/// Linear between consecutive kept views, periodic over the full turn (the
/// last kept view wraps to the first); the detector axis is untouched and
/// kept rows are reproduced exactly.
pub fn interpolate_sinogram(compact: &Sinogram, target_views: usize) -> Result<Sinogram> {
    if compact.views < 2 {
        return Err(Error::InvalidSize(format!(
            "interpolation needs >= 2 views, got {}",
            compact.views
        )));
    }
    if target_views == 0 || target_views % compact.views != 0 {
        return Err(Error::DimensionMismatch(format!(
            "target views {target_views} must be a positive multiple of {}",
            compact.views
        )));
    }
    if target_views == compact.views {
        return Ok(compact.clone());
    }
    let stride = target_views / compact.views;
    let mut out = Sinogram::zeros(target_views, compact.detectors);
    for v in 0..target_views {
        let seg = v / stride;
        let frac = (v % stride) as f64 / stride as f64;
        let row0 = compact.row(seg);
        let row1 = compact.row((seg + 1) % compact.views);
        let dst = out.row_mut(v);
        if frac == 0.0 {
            dst.copy_from_slice(row0);
        } else {
            for ((d, &a), &b) in dst.iter_mut().zip(row0).zip(row1) {
                *d = (1.0 - frac) * a + frac * b;
            }
        }
    }
    Ok(out)
}

/// Closed-form data-consistency projection.
///
/// Rows outside the acquisition set are passed through; acquired rows become
/// `(y + lambda * x) / (1 + lambda)`. `lambda = 0` is hard replacement by
/// the measurement.
pub fn data_consistency(
    x_tau: &Sinogram,
    y_compact: &Sinogram,
    m: &SubsampleMask,
    lambda: f64,
) -> Result<Sinogram> {
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda {lambda} must be >= 0")));
    }
    check_views(x_tau, m)?;
    if y_compact.views != m.kept_count() || y_compact.detectors != x_tau.detectors {
        return Err(Error::DimensionMismatch(format!(
            "measurement {}x{} does not match mask ({} kept) and sinogram ({} detectors)",
            y_compact.views,
            y_compact.detectors,
            m.kept_count(),
            x_tau.detectors
        )));
    }
    let mut out = x_tau.clone();
    let denom = 1.0 + lambda;
    for (k, &v) in m.kept_view_indices.iter().enumerate() {
        let meas = y_compact.row(k);
        let row = out.row_mut(v);
        if lambda == 0.0 {
            row.copy_from_slice(meas);
        } else {
            for (r, &yv) in row.iter_mut().zip(meas) {
                *r = (yv + lambda * *r) / denom;
            }
        }
    }
    Ok(out)
}
