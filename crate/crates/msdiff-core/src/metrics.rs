//! Reconstruction quality metrics and profile-line extraction.

use crate::error::{Error, Result};
use crate::raster::ImageGrid;

/// PSNR reported for identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
    pub data_range: f64,
}

fn check_dims(a: &ImageGrid, b: &ImageGrid) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.values.len() as f64)
}

/// `10 log10(range^2 / mse)`, capped at [`PSNR_CAP_DB`] for identical images.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, data_range: f64) -> Result<f64> {
    if data_range <= 0.0 {
        return Err(Error::Domain(format!("data range {data_range} must be > 0")));
    }
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / err).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local structural similarity with an 11-tap Gaussian window
/// (sigma 1.5) over all fully interior window positions.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, data_range: f64) -> Result<f64> {
    check_dims(a, b)?;
    if data_range <= 0.0 {
        return Err(Error::Domain(format!("data range {data_range} must be > 0")));
    }
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::InvalidSize(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}-tap SSIM window",
            a.width, a.height
        )));
    }
    let w1d = gaussian_window();
    let c1 = (0.01 * data_range) * (0.01 * data_range);
    let c2 = (0.03 * data_range) * (0.03 * data_range);
    let half = SSIM_WINDOW / 2;
    let (width, height) = (a.width, a.height);

    let mut total = 0.0;
    let mut count = 0usize;
    for cy in half..height - half {
        for cx in half..width - half {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            let mut ab = 0.0;
            for (dy, &wy) in w1d.iter().enumerate() {
                let row = cy + dy - half;
                for (dx, &wx) in w1d.iter().enumerate() {
                    let col = cx + dx - half;
                    let w = wy * wx;
                    let va = a.values[row * width + col];
                    let vb = b.values[row * width + col];
                    mu_a += w * va;
                    mu_b += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let value = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += value;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Compare two images against a shared ground truth.
pub fn report(recon: &ImageGrid, truth: &ImageGrid, data_range: Option<f64>) -> Result<MetricsReport> {
    let range = match data_range {
        Some(r) => r,
        None => {
            let max = truth.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = truth.values.iter().cloned().fold(f64::INFINITY, f64::min);
            let r = max - min;
            if r > 0.0 {
                r
            } else {
                1.0
            }
        }
    };
    Ok(MetricsReport {
        psnr: psnr(recon, truth, range)?,
        ssim: ssim(recon, truth, range)?,
        mse: mse(recon, truth)?,
        data_range: range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileAxis {
    Row(usize),
    Column(usize),
}

/// Extract a 1D slice along a row or column.
pub fn extract_profile(image: &ImageGrid, axis: ProfileAxis) -> Result<Vec<f64>> {
    match axis {
        ProfileAxis::Row(r) => {
            if r >= image.height {
                return Err(Error::InvalidSize(format!("row {r} out of range")));
            }
            Ok((0..image.width).map(|c| image.at(r, c)).collect())
        }
        ProfileAxis::Column(c) => {
            if c >= image.width {
                return Err(Error::InvalidSize(format!("column {c} out of range")));
            }
            Ok((0..image.height).map(|r| image.at(r, c)).collect())
        }
    }
}

/// CSV with one labelled column per profile, for overlay plots.
pub fn profiles_to_csv(labels: &[&str], profiles: &[Vec<f64>]) -> String {
    let mut out = String::from("index");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    let len = profiles.iter().map(|p| p.len()).max().unwrap_or(0);
    for i in 0..len {
        out.push_str(&i.to_string());
        for p in profiles {
            out.push(',');
            if let Some(v) = p.get(i) {
                out.push_str(&format!("{v:.9e}"));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::shepp_logan;

    fn constant(n: usize, v: f64) -> ImageGrid {
        let mut g = ImageGrid::unit_square(n);
        g.values.fill(v);
        g
    }

    #[test]
    fn mse_of_identical_images_is_zero() {
        let g = shepp_logan(32).unwrap();
        assert_eq!(mse(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn mse_of_constant_offset_is_square_of_offset() {
        let a = constant(16, 0.25);
        let b = constant(16, 0.25 + 0.5);
        assert!((mse(&a, &b).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mse_two_pixel_hand_case() {
        let a = ImageGrid {
            width: 2,
            height: 1,
            pixel_size: 1.0,
            values: vec![0.0, 1.0],
        };
        let b = ImageGrid {
            width: 2,
            height: 1,
            pixel_size: 1.0,
            values: vec![1.0, 1.0],
        };
        assert_eq!(mse(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn psnr_endpoints() {
        let a = constant(16, 0.3);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        // mse == range^2 -> 0 dB.
        let b = constant(16, 1.3);
        assert!((psnr(&a, &b, 1.0).unwrap()).abs() < 1e-12);
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn psnr_30db_at_milli_range_mse() {
        // mse = 1e-3 * range^2 -> 30 dB.
        let a = constant(16, 0.0);
        let b = constant(16, 1e-3f64.sqrt());
        assert!((psnr(&a, &b, 1.0).unwrap() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_as_mse_increases() {
        let a = constant(16, 0.0);
        let mut last = f64::INFINITY;
        for k in 1..=8 {
            let b = constant(16, 0.05 * k as f64);
            let p = psnr(&a, &b, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn ssim_identical_is_one_and_window_guard_holds() {
        let g = shepp_logan(32).unwrap();
        assert!((ssim(&g, &g, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let tiny = constant(8, 0.0);
        assert!(ssim(&tiny, &tiny, 1.0).is_err());
    }

    /// Direct windowed-formula oracle on a 16x16 gradient image.
    fn ssim_oracle(a: &ImageGrid, b: &ImageGrid, range: f64) -> f64 {
        let w1d = gaussian_window();
        let c1 = (0.01 * range) * (0.01 * range);
        let c2 = (0.03 * range) * (0.03 * range);
        let half = SSIM_WINDOW / 2;
        let mut vals = Vec::new();
        for cy in half..a.height - half {
            for cx in half..a.width - half {
                let mut wa = Vec::new();
                let mut wb = Vec::new();
                let mut ws = Vec::new();
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let r = cy + dy - half;
                        let c = cx + dx - half;
                        wa.push(a.at(r, c));
                        wb.push(b.at(r, c));
                        ws.push(w1d[dy] * w1d[dx]);
                    }
                }
                let mu = |v: &[f64]| -> f64 { v.iter().zip(&ws).map(|(x, w)| x * w).sum() };
                let ma = mu(&wa);
                let mb = mu(&wb);
                let var = |v: &[f64], m: f64| -> f64 {
                    v.iter().zip(&ws).map(|(x, w)| w * (x - m) * (x - m)).sum()
                };
                let cov: f64 = wa
                    .iter()
                    .zip(&wb)
                    .zip(&ws)
                    .map(|((x, y), w)| w * (x - ma) * (y - mb))
                    .sum();
                vals.push(
                    ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (var(&wa, ma) + var(&wb, mb) + c2)),
                );
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn ssim_matches_direct_formula_and_negates_on_inverted_image() {
        let n = 16;
        let mut a = ImageGrid::unit_square(n);
        for r in 0..n {
            for c in 0..n {
                *a.at_mut(r, c) = (r as f64 + 2.0 * c as f64) / (3.0 * n as f64);
            }
        }
        // Range-symmetric negative: reflect around the midpoint of [0, 1].
        let mut b = a.clone();
        for v in &mut b.values {
            *v = 1.0 - *v;
        }
        let got = ssim(&a, &b, 1.0).unwrap();
        let want = ssim_oracle(&a, &b, 1.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(got < 0.0, "inverted image should anti-correlate: {got}");
    }

    #[test]
    fn ssim_constant_shift_matches_luminance_closed_form() {
        let a = constant(16, 0.25);
        let b = constant(16, 0.75);
        // Zero variances: SSIM = (2 mu_a mu_b + C1)/(mu_a^2 + mu_b^2 + C1).
        let c1 = 0.01f64 * 0.01;
        let expect = (2.0 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
        let got = ssim(&a, &b, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = shepp_logan(32).unwrap();
        let mut b = a.clone();
        for (i, v) in b.values.iter_mut().enumerate() {
            *v += ((i % 7) as f64 - 3.0) * 0.01;
        }
        let ab = ssim(&a, &b, 1.0).unwrap();
        let ba = ssim(&b, &a, 1.0).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn profile_of_constant_image_is_constant_with_full_length() {
        let g = constant(16, 0.4);
        let p = extract_profile(&g, ProfileAxis::Row(7)).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.iter().all(|&v| v == 0.4));
        assert!(extract_profile(&g, ProfileAxis::Row(16)).is_err());
    }

    #[test]
    fn center_row_profile_crosses_ellipse_boundaries_where_expected() {
        let n = 128;
        let g = shepp_logan(n).unwrap();
        // Row whose y-center is closest to y = 0.
        let row = (0..n)
            .min_by(|&a, &b| {
                g.y_center(a)
                    .abs()
                    .partial_cmp(&g.y_center(b).abs())
                    .unwrap()
            })
            .unwrap();
        let p = extract_profile(&g, ProfileAxis::Row(row)).unwrap();
        let y = g.y_center(row);
        // Outer skull ellipse (a=0.69, b=0.92): crossing at |x| = a*sqrt(1-(y/b)^2).
        let x_cross = 0.69 * (1.0 - (y / 0.92) * (y / 0.92)).sqrt();
        let first_nonzero = p.iter().position(|&v| v != 0.0).unwrap();
        let expected_col = ((-x_cross) + 1.0) / (2.0 / n as f64) - 0.5;
        assert!(
            (first_nonzero as f64 - expected_col).abs() <= 1.5,
            "first nonzero at {first_nonzero}, expected near {expected_col}"
        );
    }

    #[test]
    fn profiles_csv_has_header_and_rows() {
        let csv = profiles_to_csv(&["gt", "fbp"], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "index,gt,fbp");
        assert_eq!(csv.lines().count(), 3);
    }
}
