use std::path::Path;

use super::image::write_png;
use super::Image;
use crate::error::{Error, Result};

/// How raw per-pixel errors are mapped to display brightness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Divide by the largest error in the map (all-zero maps stay zero).
    PerImageMax,
    /// Divide by a fixed error magnitude and saturate at 1, so maps sharing
    /// the scale are directly comparable.
    FixedScale(f32),
}

/// Per-pixel coding-noise magnitude in `[0, 1]`; brighter means larger error.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub normalization: Normalization,
}

/// Channel-mean absolute error per pixel, before normalization.
pub fn raw_error(original: &Image, decoded: &Image) -> Result<Vec<f32>> {
    if original.dims() != decoded.dims() {
        return Err(Error::DimensionMismatch(format!(
            "noise map of {:?} vs {:?}",
            original.dims(),
            decoded.dims()
        )));
    }
    let n = original.pixels();
    let (a, b) = (original.samples(), decoded.samples());
    Ok((0..n)
        .map(|i| {
            (0..3)
                .map(|c| (a[c * n + i] - b[c * n + i]).abs())
                .sum::<f32>()
                / 3.0
        })
        .collect())
}

pub fn noise_map_with(original: &Image, decoded: &Image, normalization: Normalization) -> Result<NoiseMap> {
    let raw = raw_error(original, decoded)?;
    let values = match normalization {
        Normalization::PerImageMax => {
            let max = raw.iter().copied().fold(0.0f32, f32::max);
            if max > 0.0 {
                raw.iter().map(|&e| if e == max { 1.0 } else { e / max }).collect()
            } else {
                raw
            }
        }
        Normalization::FixedScale(scale) => {
            if !(scale > 0.0) {
                return Err(Error::Config(format!("noise scale must be positive, got {scale}")));
            }
            raw.iter().map(|&e| (e / scale).min(1.0)).collect()
        }
    };
    Ok(NoiseMap {
        width: original.width(),
        height: original.height(),
        values,
        normalization,
    })
}

/// Noise map normalized by its own maximum.
pub fn noise_map(original: &Image, decoded: &Image) -> Result<NoiseMap> {
    noise_map_with(original, decoded, Normalization::PerImageMax)
}

impl NoiseMap {
    pub fn mean_brightness(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> NoiseMap {
        let mut values = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            values.extend_from_slice(&self.values[y * self.width + x0..y * self.width + x0 + width]);
        }
        NoiseMap {
            width,
            height,
            values,
            normalization: self.normalization,
        }
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().map(|&v| (v * 255.0).round() as u8).collect();
        write_png(path.as_ref(), self.width, self.height, png::ColorType::Grayscale, &bytes)
    }
}
