//! Gradient-based training of codec layers and post-processors, plus
//! compressed-pair dataset construction and numerical gradient checks.
//!
//! Every optimization step computes one gradient per sample and sums them in
//! sample order, so results do not depend on how many threads ran the
//! samples. `deterministic` additionally forces single-threaded execution.

pub mod codec_train;
pub mod gradcheck;
pub mod pairs;
pub mod postproc_train;

pub use codec_train::{train_base_on, train_codec, train_enh_on};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckTarget};
pub use pairs::{build_pairs, build_pairs_from, Pair, PairSet};
pub use postproc_train::train_postproc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::imaging::{load_image, DatasetManifest, Image};
use crate::nn::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    BaseCodec,
    EnhCodec,
    Postproc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub target: Target,
    /// Rate-distortion weight; ignored for post-processors.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Side of the square training crops.
    pub patch: usize,
    /// Random crop and horizontal flip of post-processor pairs.
    pub augment: bool,
    pub seed: u64,
    pub deterministic: bool,
}

impl TrainConfig {
    /// Small-scale profile that trains in minutes on one core.
    pub fn desk(target: Target) -> Self {
        match target {
            Target::BaseCodec | Target::EnhCodec => TrainConfig {
                target,
                lambda: if target == Target::BaseCodec { 0.0025 } else { 0.010 },
                learning_rate: 1e-3,
                batch_size: 8,
                epochs: 60,
                patch: 64,
                augment: false,
                seed: 0,
                deterministic: true,
            },
            Target::Postproc => TrainConfig {
                target,
                lambda: 0.010,
                learning_rate: 5e-4,
                batch_size: 4,
                epochs: 25,
                patch: 32,
                augment: true,
                seed: 0,
                deterministic: true,
            },
        }
    }

    pub fn full(target: Target) -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 16,
            epochs: 100,
            patch: 128,
            ..Self::desk(target)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patch == 0 {
            return Err(Error::Config("batch size and patch must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.target != Target::Postproc && !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bpp: Option<f64>,
    pub mse: f64,
    /// MSE of the identity map on the same crops (post-processor only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_mse: Option<f64>,
    pub steps: u64,
    pub wall_seconds: f64,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("epoch record serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        self.log.iter().map(|r| r.to_json_line() + "\n").collect()
    }
}

pub(crate) fn load_all(manifest: &DatasetManifest) -> Result<Vec<Image>> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset(format!("manifest '{}' has no entries", manifest.split_tag)));
    }
    manifest.entries().iter().map(|e| load_image(&e.path)).collect()
}

/// Sums per-sample gradients in sample order. `sample(i, grad)` must add
/// the (already batch-scaled) gradient of sample `i` into `grad`.
pub(crate) fn batch_gradient<M, T>(
    n: usize,
    deterministic: bool,
    zero: impl Fn() -> M + Sync,
    sample: impl Fn(usize, &mut M) -> T + Sync,
) -> (M, Vec<T>)
where
    M: Parameters<f32> + Send,
    T: Send,
{
    let run = |i: usize| {
        let mut g = zero();
        let t = sample(i, &mut g);
        (g, t)
    };
    let parts: Vec<(M, T)> = if deterministic {
        (0..n).map(run).collect()
    } else {
        (0..n).into_par_iter().map(run).collect()
    };
    let mut total = zero();
    let mut out = Vec::with_capacity(n);
    for (g, t) in parts {
        total.accumulate(&g);
        out.push(t);
    }
    (total, out)
}
