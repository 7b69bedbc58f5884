//! Fan-beam acquisition geometry.
//!
//! A point source rotates on a circle of radius `source_to_center` around
//! the origin; a flat detector array of `detector_count` elements with
//! spacing `detector_pitch` sits `center_to_detector` beyond the origin,
//! perpendicular to the source-origin axis. Views are evenly spaced over
//! a full turn.

use crate::error::{Error, Result};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub struct FanGeometry {
    pub source_to_center: f64,
    pub center_to_detector: f64,
    pub detector_count: usize,
    pub detector_pitch: f64,
    /// Strictly increasing, evenly spaced view angles (radians).
    pub view_angles: Vec<f64>,
    /// Image raster side in pixels.
    pub image_side: usize,
    /// Physical pixel size of the image raster.
    pub pixel_size: f64,
}

impl FanGeometry {
    pub fn new(
        source_to_center: f64,
        center_to_detector: f64,
        detector_count: usize,
        detector_pitch: f64,
        view_angles: Vec<f64>,
        image_side: usize,
        pixel_size: f64,
    ) -> Result<Self> {
        let geom = FanGeometry {
            source_to_center,
            center_to_detector,
            detector_count,
            detector_pitch,
            view_angles,
            image_side,
            pixel_size,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry with `views` angles evenly spaced over a full turn and the
    /// detector sized to cover the image field of view with 10% margin.
    pub fn fitted(
        source_to_center: f64,
        center_to_detector: f64,
        views: usize,
        detector_count: usize,
        image_side: usize,
        pixel_size: f64,
    ) -> Result<Self> {
        let fov_radius = 0.5 * image_side as f64 * pixel_size;
        let margin = 1.1 * fov_radius;
        if margin >= source_to_center {
            return Err(Error::Geometry(format!(
                "source distance {source_to_center} too close for field of view {fov_radius}"
            )));
        }
        let half_fan = (margin / source_to_center).asin();
        let dist = source_to_center + center_to_detector;
        let pitch = 2.0 * dist * half_fan.tan() / detector_count as f64;
        let angles = (0..views).map(|v| v as f64 * TAU / views as f64).collect();
        Self::new(
            source_to_center,
            center_to_detector,
            detector_count,
            pitch,
            angles,
            image_side,
            pixel_size,
        )
    }

    /// Reference desk geometry: 720 views, 720 detector elements, source and
    /// detector both 400 length units from the rotation center, image raster
    /// spanning `[-1, 1]^2`.
    pub fn desk_default(image_side: usize) -> Result<Self> {
        Self::fitted(400.0, 400.0, 720, 720, image_side, 2.0 / image_side as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.detector_count == 0 {
            return Err(Error::Geometry("detector_count must be >= 1".into()));
        }
        if self.view_angles.is_empty() {
            return Err(Error::Geometry("at least one view required".into()));
        }
        if !(self.detector_pitch > 0.0) || !(self.pixel_size > 0.0) {
            return Err(Error::Geometry("pitch and pixel size must be positive".into()));
        }
        let fov_radius = 0.5 * self.image_side as f64 * self.pixel_size;
        if self.source_to_center <= fov_radius {
            return Err(Error::Geometry(format!(
                "source_to_center {} must exceed field-of-view radius {}",
                self.source_to_center, fov_radius
            )));
        }
        if self.view_angles.len() > 1 {
            let step = self.view_angles[1] - self.view_angles[0];
            if step <= 0.0 {
                return Err(Error::Geometry("view angles must be increasing".into()));
            }
            for w in self.view_angles.windows(2) {
                if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
                    return Err(Error::Geometry("view angles must be evenly spaced".into()));
                }
            }
        }
        Ok(())
    }

    pub fn views(&self) -> usize {
        self.view_angles.len()
    }

    /// Source position for a view angle.
    #[inline]
    pub fn source_position(&self, angle: f64) -> (f64, f64) {
        let (s, c) = angle.sin_cos();
        (self.source_to_center * c, self.source_to_center * s)
    }

    /// Lateral offset of a detector element center from the central ray.
    #[inline]
    pub fn detector_offset(&self, det: usize) -> f64 {
        (det as f64 - 0.5 * (self.detector_count as f64 - 1.0)) * self.detector_pitch
    }

    /// Detector element center position for a view angle.
    #[inline]
    pub fn detector_position(&self, angle: f64, det: usize) -> (f64, f64) {
        let (s, c) = angle.sin_cos();
        let u = self.detector_offset(det);
        (
            -self.center_to_detector * c - u * s,
            -self.center_to_detector * s + u * c,
        )
    }

    /// Geometry restricted to a subset of view indices (used for compact
    /// sparse-view sinograms). Indices must form an evenly spaced subset.
    pub fn with_view_subset(&self, indices: &[usize]) -> Result<FanGeometry> {
        let angles: Vec<f64> = indices
            .iter()
            .map(|&i| {
                self.view_angles
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Geometry(format!("view index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Self::new(
            self.source_to_center,
            self.center_to_detector,
            self.detector_count,
            self.detector_pitch,
            angles,
            self.image_side,
            self.pixel_size,
        )
    }
}
