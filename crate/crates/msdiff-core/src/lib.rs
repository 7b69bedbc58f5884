//! Fan-beam CT workbench: phantom simulation, Siddon projection, FBP,
//! sinogram-domain diffusion priors (FDM/SDM), and the MSDiff alternating
//! predictor-corrector reconstruction with data consistency.

pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod projector;
pub mod raster;
pub mod rasterio;
pub mod rng;
pub mod sampler;
pub mod sinogram_ops;

pub use error::Error;
pub use geometry::FanGeometry;
pub use raster::{ImageGrid, Sinogram};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
