//! On-disk raster format.
//!
//! Fixed 32-byte header followed by a little-endian 32-bit float payload:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  "MSDFRST1"
//! 8       4     u32    dtype tag (1 = f32)
//! 12      4     u32    kind (0 = image, 1 = sinogram)
//! 16      4     u32    rows   (image height / sinogram views)
//! 20      4     u32    cols   (image width  / sinogram detectors)
//! 24      4     f32    spacing (pixel size; 0 for sinograms)
//! 28      4     u32    reserved (0)
//! ```
//!
//! Values are stored as f32: saving truncates f64 rasters once; a saved
//! file round-trips bit-exactly thereafter.

use crate::error::{Error, Result};
use crate::raster::{ImageGrid, Sinogram};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MSDFRST1";
const DTYPE_F32: u32 = 1;
const KIND_IMAGE: u32 = 0;
const KIND_SINOGRAM: u32 = 1;

/// Maximum rows/cols accepted when loading; guards the payload allocation.
const MAX_DIM: u32 = 16_384;

struct Header {
    kind: u32,
    rows: u32,
    cols: u32,
    spacing: f32,
}

fn write_raster(path: &Path, header: &Header, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&DTYPE_F32.to_le_bytes())?;
    w.write_all(&header.kind.to_le_bytes())?;
    w.write_all(&header.rows.to_le_bytes())?;
    w.write_all(&header.cols.to_le_bytes())?;
    w.write_all(&header.spacing.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_raster(path: &Path) -> Result<(Header, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 32];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &head[0..8] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    if u32_at(8) != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype tag {}", u32_at(8))));
    }
    let header = Header {
        kind: u32_at(12),
        rows: u32_at(16),
        cols: u32_at(20),
        spacing: f32::from_le_bytes(head[24..28].try_into().unwrap()),
    };
    if header.rows == 0 || header.cols == 0 || header.rows > MAX_DIM || header.cols > MAX_DIM {
        return Err(Error::Format(format!(
            "dimensions {}x{} out of range",
            header.rows, header.cols
        )));
    }
    let count = header.rows as usize * header.cols as usize;
    let mut payload = vec![0u8; count * 4];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Format("truncated payload".into()))?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((header, values))
}

pub fn save_image(path: impl AsRef<Path>, grid: &ImageGrid) -> Result<()> {
    write_raster(
        path.as_ref(),
        &Header {
            kind: KIND_IMAGE,
            rows: grid.height as u32,
            cols: grid.width as u32,
            spacing: grid.pixel_size as f32,
        },
        &grid.values,
    )
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let (h, values) = read_raster(path.as_ref())?;
    if h.kind != KIND_IMAGE {
        return Err(Error::Format(format!("expected image, found kind {}", h.kind)));
    }
    Ok(ImageGrid {
        width: h.cols as usize,
        height: h.rows as usize,
        pixel_size: f64::from(h.spacing),
        values,
    })
}

pub fn save_sinogram(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    write_raster(
        path.as_ref(),
        &Header {
            kind: KIND_SINOGRAM,
            rows: sino.views as u32,
            cols: sino.detectors as u32,
            spacing: 0.0,
        },
        &sino.values,
    )
}

pub fn load_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    let (h, values) = read_raster(path.as_ref())?;
    if h.kind != KIND_SINOGRAM {
        return Err(Error::Format(format!(
            "expected sinogram, found kind {}",
            h.kind
        )));
    }
    Ok(Sinogram {
        views: h.rows as usize,
        detectors: h.cols as usize,
        values,
    })
}
