//! MSE training of the post-processor on compressed/original pairs.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_gradient, EpochRecord, PairSet, Target, TrainConfig, TrainOutcome};
use crate::checkpoint::Provenance;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{Adam, Real, Tensor};
use crate::postproc::{build_postproc, PostprocModel, RrdbConfig};

const PEAK2: f64 = 255.0 * 255.0;

/// Random crop of side `min(patch, extent)` plus a coin-flip horizontal
/// mirror, applied identically to both images of a pair.
fn augment(compressed: &Image, original: &Image, patch: usize, rng: &mut impl Rng) -> (Tensor<f32>, Tensor<f32>) {
    let (w, h) = original.dims();
    let (cw, ch) = (patch.min(w), patch.min(h));
    let x0 = rng.gen_range(0..=w - cw);
    let y0 = rng.gen_range(0..=h - ch);
    let mut a = compressed.crop(x0, y0, cw, ch);
    let mut b = original.crop(x0, y0, cw, ch);
    if rng.gen::<bool>() {
        a = a.flip_horizontal();
        b = b.flip_horizontal();
    }
    (a.to_tensor(), b.to_tensor())
}

/// Loss of one sample as (refined mse, identity mse), accumulating
/// `scale · ∂mse/∂θ` into `grad`.
fn sample_loss(model: &PostprocModel, x: &Tensor<f32>, target: &Tensor<f32>, grad: &mut PostprocModel, scale: f32) -> (f64, f64) {
    let (r, cache) = model.forward_train(x);
    let n = x.data.len() as f64;
    let coeff = scale * f32::lit(2.0 * PEAK2 / n);
    let mut dr = Tensor::zeros(r.channels, r.height, r.width);
    let (mut sum, mut ident) = (0.0f64, 0.0f64);
    for i in 0..r.data.len() {
        let d0 = x.data[i] - target.data[i];
        let d = d0 + r.data[i];
        sum += f64::from(d) * f64::from(d);
        ident += f64::from(d0) * f64::from(d0);
        dr.data[i] = coeff * d;
    }
    model.backward(&cache, &dr, grad, false);
    (PEAK2 * sum / n, PEAK2 * ident / n)
}

/// Minimizes mean MSE₂₅₅ between `refine(compressed)` and the original.
/// Zero epochs yields the freshly initialized (identity) model.
pub fn train_postproc(pairs: &PairSet, config: &TrainConfig, model_cfg: &RrdbConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if config.target != Target::Postproc {
        return Err(Error::Config("train_postproc needs a post-processor target".into()));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = build_postproc(model_cfg, config.seed)?;
    let mut adam = Adam::new(config.learning_rate);
    adam.beta2 = 0.99;
    let mut log = Vec::new();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut ident, mut count) = (0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let jobs: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let p = &pairs.pairs()[i];
                    if config.augment {
                        augment(&p.compressed, &p.original, config.patch, &mut rng)
                    } else {
                        (p.compressed.to_tensor(), p.original.to_tensor())
                    }
                })
                .collect();
            let scale = 1.0 / jobs.len() as f32;
            let (grad, parts) = batch_gradient(
                jobs.len(),
                config.deterministic,
                || model.zeros_like(),
                |j, g| sample_loss(&model, &jobs[j].0, &jobs[j].1, g, scale),
            );
            adam.step(&mut model, &grad);
            for (l, i) in parts {
                loss += l;
                ident += i;
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        log.push(EpochRecord {
            epoch,
            loss: loss / n,
            bpp: None,
            mse: loss / n,
            identity_mse: Some(ident / n),
            steps: adam.steps_taken(),
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let provenance = Provenance {
        seed: config.seed,
        epochs: config.epochs,
        steps: adam.steps_taken(),
        final_loss: log.last().map_or(f64::NAN, |r| r.loss),
        lambda: Some(pairs.lambda).filter(|l| l.is_finite()),
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        patch: config.patch,
        parent_fingerprint: None,
        note: String::new(),
    };
    Ok(TrainOutcome {
        checkpoint: model.to_checkpoint(provenance),
        log,
    })
}
