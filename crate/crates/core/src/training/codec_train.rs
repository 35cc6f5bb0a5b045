//! Rate-distortion training of the base and enhancement layers.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_gradient, load_all, EpochRecord, Target, TrainConfig, TrainOutcome};
use crate::checkpoint::{Checkpoint, Provenance};
use crate::codec::{BaseCodec, BaseLayer, CodecConfig, EnhLayer, LossParts};
use crate::error::{Error, Result};
use crate::imaging::{DatasetManifest, Image};
use crate::nn::{Adam, Tensor};

/// Crop window aligned to the latent grid: side is the largest multiple of
/// `factor` not exceeding `patch` or the image, origin a multiple of `factor`.
fn aligned_window(w: usize, h: usize, patch: usize, factor: usize, rng: &mut impl Rng) -> (usize, usize, usize, usize) {
    let side = |extent: usize| (patch.min(extent) / factor * factor).max(factor);
    let (cw, ch) = (side(w), side(h));
    let x0 = rng.gen_range(0..=w.saturating_sub(cw) / factor) * factor;
    let y0 = rng.gen_range(0..=h.saturating_sub(ch) / factor) * factor;
    (x0, y0, cw, ch)
}

fn prepare(images: &[Image], factor: usize) -> Vec<Image> {
    images.iter().map(|im| im.pad_to_multiple(factor)).collect()
}

fn summarize(parts: &[LossParts]) -> LossParts {
    let mut total = LossParts::default();
    parts.iter().for_each(|p| total.add(p));
    total.scaled(1.0 / parts.len().max(1) as f64)
}

fn record(epoch: usize, mean: LossParts, steps: u64, start: Instant) -> EpochRecord {
    EpochRecord {
        epoch,
        loss: mean.loss,
        bpp: Some(mean.bpp),
        mse: mean.mse,
        identity_mse: None,
        steps,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

fn provenance(config: &TrainConfig, epochs: usize, steps: u64, final_loss: f64, parent: Option<String>) -> Provenance {
    Provenance {
        seed: config.seed,
        epochs,
        steps,
        final_loss,
        lambda: Some(config.lambda),
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        patch: config.patch,
        parent_fingerprint: parent,
        note: String::new(),
    }
}

/// Trains a base layer on in-memory images.
pub fn train_base_on(images: &[Image], config: &TrainConfig, codec: &CodecConfig) -> Result<TrainOutcome> {
    config.validate()?;
    codec.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("no training images".into()));
    }
    let f = codec.downsample_factor;
    let images = prepare(images, f);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = BaseLayer::<f32>::new(codec, &mut rng);
    let mut adam = Adam::new(config.learning_rate);
    let mut log = Vec::new();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..images.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut parts = Vec::with_capacity(order.len());
        for batch in order.chunks(config.batch_size) {
            let jobs: Vec<(Tensor<f32>, u64)> = batch
                .iter()
                .map(|&i| {
                    let im = &images[i];
                    let (x0, y0, w, h) = aligned_window(im.width(), im.height(), config.patch, f, &mut rng);
                    (im.crop(x0, y0, w, h).to_tensor(), rng.gen())
                })
                .collect();
            let scale = 1.0 / jobs.len() as f32;
            let (grad, p) = batch_gradient(
                jobs.len(),
                config.deterministic,
                || model.zeros_like(),
                |j, g| {
                    let mut r = ChaCha8Rng::seed_from_u64(jobs[j].1);
                    model.train_sample(&jobs[j].0, config.lambda, &mut r, g, scale)
                },
            );
            adam.step(&mut model, &grad);
            parts.extend(p);
        }
        log.push(record(epoch, summarize(&parts), adam.steps_taken(), start));
    }
    let final_loss = log.last().map_or(f64::NAN, |r| r.loss);
    let checkpoint = model.to_checkpoint(provenance(config, config.epochs, adam.steps_taken(), final_loss, None))?;
    Ok(TrainOutcome { checkpoint, log })
}

/// Trains an enhancement layer on top of a frozen base checkpoint.
pub fn train_enh_on(images: &[Image], config: &TrainConfig, base_ckpt: &Checkpoint) -> Result<TrainOutcome> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("no training images".into()));
    }
    let base = BaseCodec::from_checkpoint(base_ckpt)?;
    let codec = base.config().clone();
    let f = codec.downsample_factor;
    let images = prepare(images, f);
    // Machine reconstructions of whole images, as the decoder will see them.
    let machines: Vec<Image> = images
        .iter()
        .map(|im| {
            let (latent, _) = base.encode(im)?;
            Ok(base.reconstruct(&latent, im.width(), im.height()))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = EnhLayer::<f32>::new(&codec, &mut rng);
    let mut adam = Adam::new(config.learning_rate);
    let mut log = Vec::new();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..images.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut parts = Vec::with_capacity(order.len());
        for batch in order.chunks(config.batch_size) {
            let jobs: Vec<(Tensor<f32>, Tensor<f32>, u64)> = batch
                .iter()
                .map(|&i| {
                    let im = &images[i];
                    let (x0, y0, w, h) = aligned_window(im.width(), im.height(), config.patch, f, &mut rng);
                    (
                        im.crop(x0, y0, w, h).to_tensor(),
                        machines[i].crop(x0, y0, w, h).to_tensor(),
                        rng.gen(),
                    )
                })
                .collect();
            let scale = 1.0 / jobs.len() as f32;
            let (grad, p) = batch_gradient(
                jobs.len(),
                config.deterministic,
                || model.zeros_like(),
                |j, g| {
                    let mut r = ChaCha8Rng::seed_from_u64(jobs[j].2);
                    model.train_sample(&jobs[j].0, &jobs[j].1, config.lambda, &mut r, g, scale)
                },
            );
            adam.step(&mut model, &grad);
            parts.extend(p);
        }
        log.push(record(epoch, summarize(&parts), adam.steps_taken(), start));
    }
    let final_loss = log.last().map_or(f64::NAN, |r| r.loss);
    let parent = Some(base.fingerprint().to_string());
    let checkpoint = model.to_checkpoint(provenance(config, config.epochs, adam.steps_taken(), final_loss, parent))?;
    Ok(TrainOutcome { checkpoint, log })
}

/// Trains the layer selected by `config.target` on a manifest's images.
/// Enhancement training needs the frozen base checkpoint.
pub fn train_codec(
    manifest: &DatasetManifest,
    config: &TrainConfig,
    codec: &CodecConfig,
    base_ckpt: Option<&Checkpoint>,
) -> Result<TrainOutcome> {
    match config.target {
        Target::BaseCodec => train_base_on(&load_all(manifest)?, config, codec),
        Target::EnhCodec => {
            let base = base_ckpt.ok_or_else(|| {
                Error::Config("enhancement training requires a trained base checkpoint".into())
            })?;
            train_enh_on(&load_all(manifest)?, config, base)
        }
        Target::Postproc => Err(Error::Config("train_codec called with a post-processor target".into())),
    }
}
