use std::path::{Path, PathBuf};

use crate::codec::ScalableCodec;
use crate::error::{Error, Result};
use crate::imaging::noise::raw_error;
use crate::imaging::{load_image, noise_map_with, DatasetManifest, Image, NoiseMap, Normalization};
use crate::postproc::{refine, PostprocModel};

#[derive(Debug, Clone)]
pub struct NoiseMapOutput {
    pub human: PathBuf,
    pub refined: PathBuf,
    pub human_noise: PathBuf,
    pub refined_noise: PathBuf,
    /// Shared error magnitude that maps to full brightness.
    pub scale: f32,
    pub human_mean_brightness: f64,
    pub refined_mean_brightness: f64,
}

/// Noise maps of two reconstructions of `original` under one shared scale:
/// the largest error found in either (1.0 when both are exact).
pub fn paired_noise_maps(original: &Image, human: &Image, refined: &Image) -> Result<(NoiseMap, NoiseMap, f32)> {
    let max = raw_error(original, human)?
        .into_iter()
        .chain(raw_error(original, refined)?)
        .fold(0.0f32, f32::max);
    let scale = if max > 0.0 { max } else { 1.0 };
    let norm = Normalization::FixedScale(scale);
    Ok((
        noise_map_with(original, human, norm)?,
        noise_map_with(original, refined, norm)?,
        scale,
    ))
}

/// Writes the human and refined reconstructions of one manifest image and
/// their noise maps to `out_dir` as `{id}_human.png`, `{id}_refined.png`,
/// `{id}_noise_human.png` and `{id}_noise_refined.png`.
pub fn emit_noise_maps(
    image_id: &str,
    manifest: &DatasetManifest,
    codec: &ScalableCodec,
    model: &PostprocModel,
    out_dir: &Path,
) -> Result<NoiseMapOutput> {
    let entry = manifest
        .find(image_id)
        .ok_or_else(|| Error::UnknownImage(image_id.to_string()))?;
    let original = load_image(&entry.path)?;
    let human = codec.compress(&original)?.human;
    let refined = refine(&human, model);
    let (hn, rn, scale) = paired_noise_maps(&original, &human, &refined)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = |suffix: &str| out_dir.join(format!("{image_id}_{suffix}.png"));
    let out = NoiseMapOutput {
        human: path("human"),
        refined: path("refined"),
        human_noise: path("noise_human"),
        refined_noise: path("noise_refined"),
        scale,
        human_mean_brightness: hn.mean_brightness(),
        refined_mean_brightness: rn.mean_brightness(),
    };
    human.save_png(&out.human)?;
    refined.save_png(&out.refined)?;
    hn.save_png(&out.human_noise)?;
    rn.save_png(&out.refined_noise)?;
    Ok(out)
}
