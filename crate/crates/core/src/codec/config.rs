use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by the base (machine) and enhancement (human)
/// layers of the scalable codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub base_latent_channels: usize,
    pub enh_latent_channels: usize,
    /// Spatial reduction of the latent grid; one of 4, 8, 16.
    pub downsample_factor: usize,
    pub hidden_channels: usize,
    /// Rate-distortion weight used when training the base layer.
    pub lambda_base: f64,
    /// Quantized symbols are clamped to `[-symbol_range, symbol_range]`.
    pub symbol_range: i32,
}

impl CodecConfig {
    /// Small profile that trains on a single CPU core in minutes.
    pub fn desk() -> Self {
        CodecConfig {
            base_latent_channels: 8,
            enh_latent_channels: 8,
            downsample_factor: 4,
            hidden_channels: 32,
            lambda_base: 0.0025,
            symbol_range: 64,
        }
    }

    pub fn full() -> Self {
        CodecConfig {
            base_latent_channels: 32,
            enh_latent_channels: 32,
            downsample_factor: 8,
            hidden_channels: 96,
            lambda_base: 0.0025,
            symbol_range: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![4, 8, 16].contains(&self.downsample_factor) {
            return Err(Error::Config(format!(
                "downsample_factor must be 4, 8 or 16, got {}",
                self.downsample_factor
            )));
        }
        if self.base_latent_channels == 0 || self.enh_latent_channels == 0 || self.hidden_channels == 0 {
            return Err(Error::Config("channel counts must be at least 1".into()));
        }
        if !(self.lambda_base > 0.0) {
            return Err(Error::Config(format!("lambda_base must be positive, got {}", self.lambda_base)));
        }
        if !(1..=i16::MAX as i32 / 2).contains(&self.symbol_range) {
            return Err(Error::Config(format!("symbol_range out of bounds: {}", self.symbol_range)));
        }
        Ok(())
    }

    /// Number of stride-2 stages in each analysis/synthesis transform.
    pub fn stages(&self) -> usize {
        self.downsample_factor.trailing_zeros() as usize
    }

    /// Latent grid `(h, w)` for an image of `width × height`.
    pub fn latent_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (
            height.div_ceil(self.downsample_factor),
            width.div_ceil(self.downsample_factor),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        CodecConfig::desk().validate().unwrap();
        CodecConfig::full().validate().unwrap();
        assert_eq!(CodecConfig::desk().stages(), 2);
    }

    #[test]
    fn rejects_bad_factor_and_lambda() {
        let mut c = CodecConfig::desk();
        c.downsample_factor = 2;
        assert!(c.validate().is_err());
        let mut c = CodecConfig::desk();
        c.lambda_base = 0.0;
        assert!(c.validate().is_err());
        let mut c = CodecConfig::desk();
        c.hidden_channels = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn latent_grid_rounds_up() {
        let c = CodecConfig::desk();
        assert_eq!(c.latent_dims(37, 53), (14, 10));
    }
}
