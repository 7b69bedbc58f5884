//! In-memory raster types: attenuation images and sinograms.
//!
//! Both are dense row-major `f64` grids. `ImageGrid` rows index the spatial
//! y axis (row 0 at y = -extent, increasing upward); `Sinogram` rows index
//! projection views and columns index detector elements.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// 2D attenuation map on a square raster with physical pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    /// Physical side length of one pixel.
    pub pixel_size: f64,
    /// Row-major, `height * width` values.
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(n: usize, pixel_size: f64) -> Self {
        ImageGrid {
            width: n,
            height: n,
            pixel_size,
            values: vec![0.0; n * n],
        }
    }

    /// Square grid spanning `[-1, 1]^2`: pixel size `2 / n`.
    pub fn unit_square(n: usize) -> Self {
        Self::zeros(n, 2.0 / n as f64)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.values[row * self.width + col]
    }

    /// Physical x coordinate of a column's pixel center.
    #[inline]
    pub fn x_center(&self, col: usize) -> f64 {
        (col as f64 + 0.5) * self.pixel_size - self.half_extent_x()
    }

    /// Physical y coordinate of a row's pixel center (row 0 at the bottom).
    #[inline]
    pub fn y_center(&self, row: usize) -> f64 {
        (row as f64 + 0.5) * self.pixel_size - self.half_extent_y()
    }

    #[inline]
    pub fn half_extent_x(&self) -> f64 {
        0.5 * self.width as f64 * self.pixel_size
    }

    #[inline]
    pub fn half_extent_y(&self) -> f64 {
        0.5 * self.height as f64 * self.pixel_size
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Views x detectors raster of line integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub views: usize,
    pub detectors: usize,
    /// Row-major, `views * detectors` values; one row per view.
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(views: usize, detectors: usize) -> Self {
        Sinogram {
            views,
            detectors,
            values: vec![0.0; views * detectors],
        }
    }

    pub fn from_values(views: usize, detectors: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != views * detectors {
            return Err(Error::DimensionMismatch(format!(
                "sinogram payload {} != {} views x {} detectors",
                values.len(),
                views,
                detectors
            )));
        }
        Ok(Sinogram {
            views,
            detectors,
            values,
        })
    }

    #[inline]
    pub fn at(&self, view: usize, det: usize) -> f64 {
        self.values[view * self.detectors + det]
    }

    #[inline]
    pub fn at_mut(&mut self, view: usize, det: usize) -> &mut f64 {
        &mut self.values[view * self.detectors + det]
    }

    #[inline]
    pub fn row(&self, view: usize) -> &[f64] {
        &self.values[view * self.detectors..(view + 1) * self.detectors]
    }

    #[inline]
    pub fn row_mut(&mut self, view: usize) -> &mut [f64] {
        &mut self.values[view * self.detectors..(view + 1) * self.detectors]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Elementwise `self + scale * other`.
    pub fn add_scaled(&mut self, other: &Sinogram, scale: f64) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Sinogram {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// Fresh standard-normal raster of the same shape.
    pub fn standard_normal<R: Rng>(views: usize, detectors: usize, rng: &mut R) -> Sinogram {
        let values = (0..views * detectors)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Sinogram {
            views,
            detectors,
            values,
        }
    }
}
