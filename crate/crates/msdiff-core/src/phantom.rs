//! Synthetic phantoms and sinogram noise simulation.
//!
//! Phantoms are sums of constant-density ellipses rasterized by sampling at
//! pixel centers on the `[-1, 1]^2` field of view.

use crate::error::{Error, Result};
use crate::raster::{ImageGrid, Sinogram};
use crate::rng::seeded;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// One ellipse: center, semi-axes, rotation (radians, counterclockwise),
/// additive density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_y: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    pub rotation: f64,
    pub density: f64,
}

impl Ellipse {
    /// Whether the point lies inside or on the ellipse boundary.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let (s, c) = self.rotation.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let ua = u / self.semi_axis_a;
        let vb = v / self.semi_axis_b;
        ua * ua + vb * vb <= 1.0
    }

    /// Same ellipse rotated about the origin by `angle`.
    pub fn rotated_about_origin(&self, angle: f64) -> Ellipse {
        let (s, c) = angle.sin_cos();
        Ellipse {
            center_x: c * self.center_x - s * self.center_y,
            center_y: s * self.center_x + c * self.center_y,
            rotation: self.rotation + angle,
            ..*self
        }
    }
}

/// Additive ellipse list; the raster value at a point is the sum of the
/// densities of the ellipses containing it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EllipsePhantomSpec {
    pub ellipses: Vec<Ellipse>,
}

impl EllipsePhantomSpec {
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.density)
            .sum()
    }

    /// Rasterize on an n x n grid spanning `[-1, 1]^2`, sampling at pixel
    /// centers.
    pub fn rasterize(&self, n: usize) -> ImageGrid {
        let mut grid = ImageGrid::unit_square(n);
        for row in 0..n {
            let y = grid.y_center(row);
            for col in 0..n {
                let x = grid.x_center(col);
                grid.values[row * n + col] = self.value_at(x, y);
            }
        }
        grid
    }

    /// Plain-text key-value serialization, one `ellipse = cx cy a b rot rho`
    /// line per ellipse.
    pub fn to_text(&self) -> String {
        let mut out = String::from("format = ellipse-phantom-v1\n");
        out.push_str(&format!("count = {}\n", self.ellipses.len()));
        for e in &self.ellipses {
            out.push_str(&format!(
                "ellipse = {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}\n",
                e.center_x, e.center_y, e.semi_axis_a, e.semi_axis_b, e.rotation, e.density
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut ellipses = Vec::new();
        let mut saw_format = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad phantom spec line: {line}")))?;
            match key.trim() {
                "format" => {
                    if value.trim() != "ellipse-phantom-v1" {
                        return Err(Error::Format(format!("unknown spec format {value}")));
                    }
                    saw_format = true;
                }
                "count" => {}
                "ellipse" => {
                    let nums: Vec<f64> = value
                        .split_whitespace()
                        .map(|t| {
                            t.parse::<f64>()
                                .map_err(|_| Error::Format(format!("bad number {t}")))
                        })
                        .collect::<Result<_>>()?;
                    if nums.len() != 6 {
                        return Err(Error::Format("ellipse line needs 6 numbers".into()));
                    }
                    ellipses.push(Ellipse {
                        center_x: nums[0],
                        center_y: nums[1],
                        semi_axis_a: nums[2],
                        semi_axis_b: nums[3],
                        rotation: nums[4],
                        density: nums[5],
                    });
                }
                other => return Err(Error::Format(format!("unknown spec key {other}"))),
            }
        }
        if !saw_format {
            return Err(Error::Format("missing format line".into()));
        }
        Ok(EllipsePhantomSpec { ellipses })
    }
}

/// Standard ten-ellipse head phantom (contrast-enhanced variant), values
/// in `[0, 1]`.
pub fn shepp_logan_spec() -> EllipsePhantomSpec {
    const DEG: f64 = std::f64::consts::PI / 180.0;
    // (a, b, cx, cy, rotation_deg, density)
    const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
        (0.69, 0.92, 0.0, 0.0, 0.0, 1.0),
        (0.6624, 0.8740, 0.0, -0.0184, 0.0, -0.8),
        (0.11, 0.31, 0.22, 0.0, -18.0, -0.2),
        (0.16, 0.41, -0.22, 0.0, 18.0, -0.2),
        (0.21, 0.25, 0.0, 0.35, 0.0, 0.1),
        (0.046, 0.046, 0.0, 0.1, 0.0, 0.1),
        (0.046, 0.046, 0.0, -0.1, 0.0, 0.1),
        (0.046, 0.023, -0.08, -0.605, 0.0, 0.1),
        (0.023, 0.023, 0.0, -0.606, 0.0, 0.1),
        (0.023, 0.046, 0.06, -0.605, 0.0, 0.1),
    ];
    EllipsePhantomSpec {
        ellipses: TABLE
            .iter()
            .map(|&(a, b, cx, cy, rot, rho)| Ellipse {
                center_x: cx,
                center_y: cy,
                semi_axis_a: a,
                semi_axis_b: b,
                rotation: rot * DEG,
                density: rho,
            })
            .collect(),
    }
}

/// Rasterized head phantom at n x n.
pub fn shepp_logan(n: usize) -> Result<ImageGrid> {
    if n < 16 {
        return Err(Error::InvalidSize(format!("phantom size {n} < 16")));
    }
    Ok(shepp_logan_spec().rasterize(n))
}

/// Reproducible random phantom: `spec_count` ellipses with positive
/// densities, all inside the unit-circle field of view.
pub fn random_phantom(n: usize, spec_count: usize, seed: u64) -> Result<(EllipsePhantomSpec, ImageGrid)> {
    if n < 16 {
        return Err(Error::InvalidSize(format!("phantom size {n} < 16")));
    }
    if spec_count == 0 || spec_count > 16 {
        return Err(Error::InvalidSize(format!(
            "spec_count {spec_count} outside [1, 16]"
        )));
    }
    let mut rng = seeded(seed);
    let mut ellipses = Vec::with_capacity(spec_count);
    // Broad background disk so every phantom has support, then detail ellipses.
    ellipses.push(Ellipse {
        center_x: 0.0,
        center_y: 0.0,
        semi_axis_a: rng.gen_range(0.55..0.8),
        semi_axis_b: rng.gen_range(0.55..0.8),
        rotation: rng.gen_range(0.0..std::f64::consts::PI),
        density: rng.gen_range(0.3..0.6),
    });
    while ellipses.len() < spec_count {
        let a = rng.gen_range(0.05..0.35);
        let b = rng.gen_range(0.05..0.35);
        let r = rng.gen_range(0.0..0.55);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let e = Ellipse {
            center_x: r * phi.cos(),
            center_y: r * phi.sin(),
            semi_axis_a: a,
            semi_axis_b: b,
            rotation: rng.gen_range(0.0..std::f64::consts::PI),
            density: rng.gen_range(0.1..0.5),
        };
        // Keep inside the unit circle with margin.
        if r + a.max(b) <= 0.95 {
            ellipses.push(e);
        }
    }
    let spec = EllipsePhantomSpec { ellipses };
    let grid = spec.rasterize(n);
    Ok((spec, grid))
}

/// Poisson photon-noise simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub enabled: bool,
    /// Incident photon count per ray.
    pub incident_photons: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        NoiseSpec {
            enabled: false,
            incident_photons: 1e6,
            rng_seed: 0,
        }
    }
}

/// Replace each line integral x with `-ln(max(Poisson(I0 * exp(-x)), 1) / I0)`.
///
/// The 1-photon clamp avoids `ln(0)`; with `enabled = false` the input is
/// returned unchanged.
pub fn add_poisson_noise(sino: &Sinogram, noise: &NoiseSpec) -> Result<Sinogram> {
    if !noise.enabled {
        return Ok(sino.clone());
    }
    if noise.incident_photons <= 0.0 {
        return Err(Error::Domain(format!(
            "incident photon count {} must be > 0",
            noise.incident_photons
        )));
    }
    let i0 = noise.incident_photons;
    let mut rng = seeded(noise.rng_seed);
    let mut out = sino.clone();
    for v in &mut out.values {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Domain(format!(
                "sinogram entry {v} is not a finite nonnegative line integral"
            )));
        }
        let lambda = i0 * (-*v).exp();
        let counts = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive lambda").sample(&mut rng)
        } else {
            0.0
        };
        *v = -(counts.max(1.0) / i0).ln();
    }
    Ok(out)
}
