//! RRDB post-processor applied to the human-layer reconstruction.

pub mod config;
pub mod rrdb;

pub use config::RrdbConfig;
pub use rrdb::Rrdb;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, CheckpointKind, ModelConfig, Provenance};
use crate::error::Result;
use crate::imaging::Image;
use crate::nn::{Parameters, Tensor};

/// Inference-precision post-processor.
pub type PostprocModel = Rrdb<f32>;

/// Images with more pixels than this are processed in overlapping tiles.
const TILE_THRESHOLD: usize = 192 * 192;
const TILE: usize = 128;

pub fn build_postproc(config: &RrdbConfig, seed: u64) -> Result<PostprocModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Rrdb::new(config, &mut rng))
}

impl Rrdb<f32> {
    pub fn to_checkpoint(&self, provenance: Provenance) -> Checkpoint {
        let mut ck = Checkpoint::new(
            CheckpointKind::Postproc,
            ModelConfig::Postproc(self.config.clone()),
            provenance,
        );
        ck.set_parameters(self);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(CheckpointKind::Postproc)?;
        let config = ck.rrdb_config()?;
        let mut model = build_postproc(config, 0)?;
        ck.load_parameters(&mut model)?;
        Ok(model)
    }

    pub fn parameter_count_actual(&self) -> usize {
        Parameters::parameter_count(self)
    }
}

/// Residual for a whole image, tiling large inputs with a margin equal to
/// the receptive radius so tile seams do not change the result.
fn residual_tiled(model: &PostprocModel, x: &Tensor<f32>) -> Tensor<f32> {
    let (h, w) = (x.height, x.width);
    if h * w <= TILE_THRESHOLD {
        return model.residual(x);
    }
    let margin = model.config.receptive_radius();
    let mut out = Tensor::zeros(3, h, w);
    for ty in (0..h).step_by(TILE) {
        for tx in (0..w).step_by(TILE) {
            let (y0, x0) = (ty.saturating_sub(margin), tx.saturating_sub(margin));
            let (y1, x1) = ((ty + TILE + margin).min(h), (tx + TILE + margin).min(w));
            let mut tile = Tensor::zeros(3, y1 - y0, x1 - x0);
            for c in 0..3 {
                for y in y0..y1 {
                    let src = &x.plane(c)[y * w + x0..y * w + x1];
                    tile.plane_mut(c)[(y - y0) * (x1 - x0)..(y - y0 + 1) * (x1 - x0)].copy_from_slice(src);
                }
            }
            let r = model.residual(&tile);
            for c in 0..3 {
                for y in ty..(ty + TILE).min(h) {
                    for xx in tx..(tx + TILE).min(w) {
                        out.plane_mut(c)[y * w + xx] = r.plane(c)[(y - y0) * (x1 - x0) + (xx - x0)];
                    }
                }
            }
        }
    }
    out
}

/// `image + residual(image)` without clamping.
pub fn refine_unclamped(image: &Image, model: &PostprocModel) -> Tensor<f32> {
    let x = image.to_tensor::<f32>();
    let mut out = residual_tiled(model, &x);
    out.add_assign(&x);
    out
}

/// `clamp(image + residual(image), 0, 1)`.
pub fn refine(image: &Image, model: &PostprocModel) -> Image {
    Image::from_tensor(&refine_unclamped(image, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config(l: usize) -> RrdbConfig {
        RrdbConfig {
            l,
            features: 6,
            growth: 3,
            beta: 0.2,
            dense_convs: 3,
            blocks_per_rrdb: 2,
        }
    }

    fn randomize(model: &mut PostprocModel, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.visit_mut(&mut |_, p| p.iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2)));
    }

    fn random_image(seed: u64, w: usize, h: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, (0..3 * w * h).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        for l in 1..=3 {
            let m = build_postproc(&small_config(l), 1).unwrap();
            assert_eq!(m.parameter_count_actual(), small_config(l).parameter_count());
        }
        let m = build_postproc(&RrdbConfig::desk(2), 1).unwrap();
        assert_eq!(m.parameter_count_actual(), RrdbConfig::desk(2).parameter_count());
    }

    #[test]
    fn fresh_model_is_identity() {
        let m = build_postproc(&small_config(2), 3).unwrap();
        let img = random_image(4, 9, 7);
        assert_eq!(refine(&img, &m), img);
    }

    #[test]
    fn zero_config_rejected_and_seed_deterministic() {
        assert!(build_postproc(&small_config(0), 1).is_err());
        let a = build_postproc(&small_config(1), 42).unwrap();
        let b = build_postproc(&small_config(1), 42).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        let c = build_postproc(&small_config(1), 43).unwrap();
        assert_ne!(a.flatten(), c.flatten());
    }

    #[test]
    fn arbitrary_shape_is_preserved() {
        let mut m = build_postproc(&small_config(1), 5).unwrap();
        randomize(&mut m, 6);
        let out = refine(&random_image(7, 53, 37), &m);
        assert_eq!(out.dims(), (53, 37));
    }

    #[test]
    fn residual_is_the_branch_output() {
        let mut m = build_postproc(&small_config(1), 5).unwrap();
        randomize(&mut m, 8);
        let img = random_image(9, 10, 8);
        let raw = refine_unclamped(&img, &m);
        let r = m.residual(&img.to_tensor());
        let x = img.to_tensor::<f32>();
        for i in 0..raw.data.len() {
            assert_eq!(raw.data[i], x.data[i] + r.data[i]);
        }
    }

    #[test]
    fn interior_is_translation_equivariant() {
        let mut m = build_postproc(&small_config(1), 5).unwrap();
        randomize(&mut m, 10);
        let radius = m.config.receptive_radius();
        let img = random_image(11, 2 * radius + 12, 2 * radius + 10);
        let (w, h) = img.dims();
        let shifted = Image::from_fn(w - 1, h, |c, y, x| img.get(c, y, x + 1));
        let a = m.residual(&img.to_tensor());
        let b = m.residual(&shifted.to_tensor());
        for c in 0..3 {
            for y in radius..h - radius {
                for x in radius..w - 1 - radius {
                    let va = a.plane(c)[y * w + x + 1];
                    let vb = b.plane(c)[y * (w - 1) + x];
                    assert!((va - vb).abs() < 1e-5, "({c},{y},{x}): {va} vs {vb}");
                }
            }
        }
    }

    #[test]
    fn tiled_inference_matches_whole_image() {
        let mut m = build_postproc(&small_config(1), 5).unwrap();
        randomize(&mut m, 12);
        let img = random_image(13, 200, 190);
        let x = img.to_tensor::<f32>();
        let tiled = residual_tiled(&m, &x);
        let whole = m.residual(&x);
        let max = tiled
            .data
            .iter()
            .zip(&whole.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max < 1e-5, "max deviation {max}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = build_postproc(&small_config(2), 5).unwrap();
        randomize(&mut m, 14);
        let ck = m.to_checkpoint(Provenance::default());
        let back = PostprocModel::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
