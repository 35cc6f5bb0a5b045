//! Measurement substrate: images, quality metrics, rate accounting, noise
//! maps, dataset manifests and patch extraction.

pub mod image;
pub mod manifest;
pub mod metrics;
pub mod noise;
pub mod patches;
pub mod synth;

pub use image::{load_image, Image};
pub use manifest::{build_manifest, DatasetManifest, ManifestEntry};
pub use metrics::{bpp, mse, psnr, psnr_with_peak, reportable_db, PSNR_SENTINEL_DB};
pub use noise::{noise_map, noise_map_with, NoiseMap, Normalization};
pub use patches::{extract_patches, patch_origins};
