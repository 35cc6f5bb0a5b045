//! Toy-scale scalable learned codec.
//!
//! The base layer compresses the image on its own and yields the
//! machine-facing reconstruction. The enhancement layer encodes the original
//! conditioned on that reconstruction and decodes a residual on top of it,
//! yielding the human-facing reconstruction. The two payloads are stored
//! separately in a [`Bitstream`] so each layer's rate can be measured alone.
//!
//! Inference runs from frozen checkpoints: integer entropy tables are fixed
//! at export time and shared bit-exactly by encoder and decoder.

pub mod bitstream;
pub mod config;
pub mod entropy;
pub mod latent;
pub mod layers;
pub mod prior;
pub mod rangecoder;
pub mod transform;

pub use bitstream::Bitstream;
pub use config::CodecConfig;
pub use entropy::{entropy_decode, entropy_encode, estimate_rate, EntropyModel};
pub use latent::{quantize, quantize_noise, quantize_round, Latent, QuantMode};
pub use layers::{BaseLayer, EnhLayer, LossParts};
pub use prior::LogisticPrior;

use crate::checkpoint::{Checkpoint, CheckpointKind, ModelConfig, Provenance};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::Tensor;

impl BaseLayer<f32> {
    pub fn to_checkpoint(&self, provenance: Provenance) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(
            CheckpointKind::BaseCodec,
            ModelConfig::Codec(self.config.clone()),
            provenance,
        );
        ck.set_parameters(self);
        ck.entropy = Some(self.prior.to_entropy_model(self.config.symbol_range)?);
        Ok(ck)
    }
}

impl EnhLayer<f32> {
    pub fn to_checkpoint(&self, provenance: Provenance) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(
            CheckpointKind::EnhCodec,
            ModelConfig::Codec(self.config.clone()),
            provenance,
        );
        ck.set_parameters(self);
        ck.entropy = Some(self.prior.to_entropy_model(self.config.symbol_range)?);
        Ok(ck)
    }
}

fn frozen_tables(ck: &Checkpoint, channels: usize) -> Result<EntropyModel> {
    let e = ck
        .entropy
        .clone()
        .ok_or_else(|| Error::CheckpointMismatch("codec checkpoint has no entropy tables".into()))?;
    if e.channels() != channels {
        return Err(Error::CheckpointMismatch(format!(
            "entropy tables cover {} channels, latent has {channels}",
            e.channels()
        )));
    }
    Ok(e)
}

/// Crops padding, clamps, and rounds to 8-bit levels so a decoded image
/// survives a PNG round trip unchanged.
fn crop_to_image(t: &Tensor<f32>, width: usize, height: usize) -> Image {
    Image::from_fn(width, height, |c, y, x| t.data[(c * t.height + y) * t.width + x]).quantize_8bit()
}

/// Frozen base layer ready for encoding and decoding.
#[derive(Debug, Clone)]
pub struct BaseCodec {
    pub layer: BaseLayer<f32>,
    pub entropy: EntropyModel,
    fingerprint: String,
}

impl BaseCodec {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(CheckpointKind::BaseCodec)?;
        let config = ck.codec_config()?.clone();
        config.validate()?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut layer = BaseLayer::new(&config, &mut rng);
        ck.load_parameters(&mut layer)?;
        let entropy = frozen_tables(ck, config.base_latent_channels)?;
        Ok(BaseCodec {
            layer,
            entropy,
            fingerprint: ck.fingerprint(),
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.layer.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Quantized machine latent and its entropy-coded payload.
    pub fn encode(&self, image: &Image) -> Result<(Latent, Vec<u8>)> {
        let x = image.pad_to_multiple(self.config().downsample_factor);
        let y = self.layer.analyze(&x.to_tensor());
        let latent = quantize_round(&Latent::from_tensor(&y), self.config().symbol_range);
        let payload = self.entropy.encode(&latent)?;
        Ok((latent, payload))
    }

    pub fn latent_shape(&self, width: usize, height: usize) -> (usize, usize, usize) {
        let (h, w) = self.config().latent_dims(width, height);
        (self.config().base_latent_channels, h, w)
    }

    pub fn reconstruct(&self, latent: &Latent, width: usize, height: usize) -> Image {
        let t = self.layer.synthesize(&latent.to_tensor());
        crop_to_image(&t, width, height)
    }

    pub fn decode(&self, payload: &[u8], width: usize, height: usize) -> Result<Image> {
        let latent = self.entropy.decode(payload, self.latent_shape(width, height))?;
        Ok(self.reconstruct(&latent, width, height))
    }
}

/// Frozen enhancement layer.
#[derive(Debug, Clone)]
pub struct EnhCodec {
    pub layer: EnhLayer<f32>,
    pub entropy: EntropyModel,
    pub lambda: Option<f64>,
    parent_fingerprint: Option<String>,
}

impl EnhCodec {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(CheckpointKind::EnhCodec)?;
        let config = ck.codec_config()?.clone();
        config.validate()?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut layer = EnhLayer::new(&config, &mut rng);
        ck.load_parameters(&mut layer)?;
        let entropy = frozen_tables(ck, config.enh_latent_channels)?;
        Ok(EnhCodec {
            layer,
            entropy,
            lambda: ck.provenance.lambda,
            parent_fingerprint: ck.provenance.parent_fingerprint.clone(),
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.layer.config
    }

    /// Fails unless this layer was trained on top of `base`.
    pub fn check_parent(&self, base: &BaseCodec) -> Result<()> {
        match &self.parent_fingerprint {
            Some(fp) if fp == base.fingerprint() => Ok(()),
            Some(_) => Err(Error::CheckpointMismatch(
                "enhancement layer was trained on a different base layer".into(),
            )),
            None => Err(Error::CheckpointMismatch(
                "enhancement checkpoint does not record its base layer".into(),
            )),
        }
    }

    fn check_dims(image: &Image, machine: &Image) -> Result<()> {
        if image.dims() != machine.dims() {
            return Err(Error::DimensionMismatch(format!(
                "image {:?} vs machine reconstruction {:?}",
                image.dims(),
                machine.dims()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, image: &Image, machine: &Image) -> Result<(Latent, Vec<u8>)> {
        Self::check_dims(image, machine)?;
        let f = self.config().downsample_factor;
        let x = image.pad_to_multiple(f).to_tensor();
        let m = machine.pad_to_multiple(f).to_tensor();
        let z = self.layer.analyze(&x, &m);
        let latent = quantize_round(&Latent::from_tensor(&z), self.config().symbol_range);
        let payload = self.entropy.encode(&latent)?;
        Ok((latent, payload))
    }

    pub fn reconstruct(&self, machine: &Image, latent: &Latent) -> Image {
        let m = machine.pad_to_multiple(self.config().downsample_factor).to_tensor();
        let t = self.layer.synthesize(&m, &latent.to_tensor());
        crop_to_image(&t, machine.width(), machine.height())
    }

    pub fn decode(&self, machine: &Image, payload: &[u8]) -> Result<Image> {
        let (h, w) = self.config().latent_dims(machine.width(), machine.height());
        let latent = self
            .entropy
            .decode(payload, (self.config().enh_latent_channels, h, w))?;
        Ok(self.reconstruct(machine, &latent))
    }
}

/// Both layers of one trained codec.
#[derive(Debug, Clone)]
pub struct ScalableCodec {
    pub base: BaseCodec,
    pub enh: EnhCodec,
}

/// Result of compressing one image.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub bitstream: Bitstream,
    pub machine: Image,
    pub human: Image,
}

impl ScalableCodec {
    pub fn new(base: BaseCodec, enh: EnhCodec) -> Result<Self> {
        enh.check_parent(&base)?;
        if base.config() != enh.config() {
            return Err(Error::CheckpointMismatch("base and enhancement configs differ".into()));
        }
        Ok(ScalableCodec { base, enh })
    }

    pub fn from_checkpoints(base: &Checkpoint, enh: &Checkpoint) -> Result<Self> {
        Self::new(BaseCodec::from_checkpoint(base)?, EnhCodec::from_checkpoint(enh)?)
    }

    pub fn compress(&self, image: &Image) -> Result<Compressed> {
        let (w, h) = image.dims();
        let (base_latent, base_payload) = self.base.encode(image)?;
        let machine = self.base.reconstruct(&base_latent, w, h);
        let (enh_latent, enh_payload) = self.enh.encode(image, &machine)?;
        let human = self.enh.reconstruct(&machine, &enh_latent);
        Ok(Compressed {
            bitstream: Bitstream::new(w, h, base_payload, enh_payload)?,
            machine,
            human,
        })
    }

    /// `(machine, human)` reconstructions.
    pub fn decompress(&self, bitstream: &Bitstream) -> Result<(Image, Image)> {
        let (w, h) = bitstream.dims();
        let machine = self.base.decode(&bitstream.base_payload, w, h)?;
        let human = self.enh.decode(&machine, &bitstream.enh_payload)?;
        Ok((machine, human))
    }
}

pub fn encode_base(image: &Image, checkpoint: &Checkpoint) -> Result<(Latent, Vec<u8>)> {
    BaseCodec::from_checkpoint(checkpoint)?.encode(image)
}

pub fn decode_base(payload: &[u8], checkpoint: &Checkpoint, width: usize, height: usize) -> Result<Image> {
    BaseCodec::from_checkpoint(checkpoint)?.decode(payload, width, height)
}

pub fn encode_enhancement(image: &Image, machine: &Image, checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    Ok(EnhCodec::from_checkpoint(checkpoint)?.encode(image, machine)?.1)
}

pub fn decode_human(machine: &Image, payload: &[u8], checkpoint: &Checkpoint) -> Result<Image> {
    EnhCodec::from_checkpoint(checkpoint)?.decode(machine, payload)
}
