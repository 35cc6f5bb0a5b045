#![allow(dead_code)]

use std::sync::OnceLock;

use sicr::checkpoint::Checkpoint;
use sicr::codec::{CodecConfig, ScalableCodec};
use sicr::imaging::synth::synthetic_image;
use sicr::imaging::Image;
use sicr::training::{train_base_on, train_enh_on, Target, TrainConfig};

pub const LOW: f64 = 0.002;
pub const HIGH: f64 = 0.05;

pub fn small_codec() -> CodecConfig {
    CodecConfig {
        base_latent_channels: 4,
        enh_latent_channels: 4,
        downsample_factor: 4,
        hidden_channels: 8,
        lambda_base: 0.0025,
        symbol_range: 64,
    }
}

pub fn quick(target: Target, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        patch: 32,
        batch_size: 4,
        ..TrainConfig::desk(target)
    }
}

pub fn images(seed: u64, count: u64, side: usize) -> Vec<Image> {
    (0..count).map(|i| synthetic_image(seed + i, side, side)).collect()
}

pub struct Trained {
    pub base: Checkpoint,
    pub enh_low: Checkpoint,
    pub enh_high: Checkpoint,
}

impl Trained {
    pub fn codec(&self) -> ScalableCodec {
        ScalableCodec::from_checkpoints(&self.base, &self.enh_low).unwrap()
    }
}

/// Small codec trained once per test binary.
pub fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let train = images(0, 32, 32);
        let base = train_base_on(&train, &quick(Target::BaseCodec, 40), &small_codec())
            .unwrap()
            .checkpoint;
        let enh = |lambda| {
            let cfg = TrainConfig {
                lambda,
                ..quick(Target::EnhCodec, 40)
            };
            train_enh_on(&train, &cfg, &base).unwrap().checkpoint
        };
        Trained {
            enh_low: enh(LOW),
            enh_high: enh(HIGH),
            base,
        }
    })
}
