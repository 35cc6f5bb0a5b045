//! Analytic gradients against central finite differences, in `f64`, on
//! tiny instances of every trainable component.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::layers::uniform_noise;
use crate::codec::prior::neg_log2;
use crate::codec::{BaseLayer, CodecConfig, EnhLayer, LogisticPrior};
use crate::nn::{Parameters, Tensor};
use crate::postproc::{Rrdb, RrdbConfig};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so gradients that are zero up
/// to rounding do not count as relative failures.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradCheckTarget {
    /// RRDB post-processor, parameters and input.
    Rrdb,
    /// Base layer rate-distortion loss.
    CodecBase,
    /// Enhancement layer rate-distortion loss.
    CodecEnh,
    /// Factorized rate model, parameters and latent.
    Rate,
    /// RRDB with every weight at zero.
    ZeroRrdb,
    /// Base layer with every transform weight at zero.
    ZeroCodec,
}

impl GradCheckTarget {
    pub const ALL: [GradCheckTarget; 6] = [
        GradCheckTarget::Rrdb,
        GradCheckTarget::CodecBase,
        GradCheckTarget::CodecEnh,
        GradCheckTarget::Rate,
        GradCheckTarget::ZeroRrdb,
        GradCheckTarget::ZeroCodec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradCheckTarget::Rrdb => "rrdb",
            GradCheckTarget::CodecBase => "codec_base",
            GradCheckTarget::CodecEnh => "codec_enh",
            GradCheckTarget::Rate => "rate",
            GradCheckTarget::ZeroRrdb => "zero_rrdb",
            GradCheckTarget::ZeroCodec => "zero_codec",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub target: GradCheckTarget,
    /// Number of scalar derivatives compared.
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter holding the largest relative error.
    pub worst: String,
}

#[derive(Default)]
struct Tally {
    checked: usize,
    max_rel: f64,
    max_abs: f64,
    worst: String,
}

impl Tally {
    fn push(&mut self, name: &str, analytic: f64, numeric: f64) {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.checked += 1;
        self.max_abs = self.max_abs.max(abs);
        if rel > self.max_rel || self.worst.is_empty() {
            self.max_rel = self.max_rel.max(rel);
            self.worst = name.to_string();
        }
    }

    fn report(self, target: GradCheckTarget) -> GradCheckReport {
        GradCheckReport {
            target,
            checked: self.checked,
            max_rel_error: self.max_rel,
            max_abs_error: self.max_abs,
            worst: self.worst,
        }
    }
}

fn nudge<M: Parameters<f64>>(model: &mut M, index: usize, delta: f64) {
    let mut offset = 0;
    model.visit_mut(&mut |_, p| {
        if (offset..offset + p.len()).contains(&index) {
            p[index - offset] += delta;
        }
        offset += p.len();
    });
}

fn names<M: Parameters<f64>>(model: &M) -> Vec<String> {
    let mut out = Vec::new();
    model.visit(&mut |name, _, p| out.extend((0..p.len()).map(|i| format!("{name}[{i}]"))));
    out
}

/// Compares every parameter derivative of `loss` with central differences.
fn check_parameters<M: Parameters<f64> + Clone>(model: &M, analytic: &M, loss: impl Fn(&M) -> f64, tally: &mut Tally) {
    let grads = analytic.flatten();
    let labels = names(model);
    let mut probe = model.clone();
    for (i, (&g, label)) in grads.iter().zip(&labels).enumerate() {
        nudge(&mut probe, i, STEP);
        let up = loss(&probe);
        nudge(&mut probe, i, -2.0 * STEP);
        let down = loss(&probe);
        nudge(&mut probe, i, STEP);
        tally.push(label, g, (up - down) / (2.0 * STEP));
    }
}

fn check_input(x: &Tensor<f64>, analytic: &Tensor<f64>, loss: impl Fn(&Tensor<f64>) -> f64, tally: &mut Tally) {
    let mut probe = x.clone();
    for i in 0..x.data.len() {
        probe.data[i] = x.data[i] + STEP;
        let up = loss(&probe);
        probe.data[i] = x.data[i] - STEP;
        let down = loss(&probe);
        probe.data[i] = x.data[i];
        tally.push(&format!("input[{i}]"), analytic.data[i], (up - down) / (2.0 * STEP));
    }
}

fn random_tensor(c: usize, h: usize, w: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(lo..hi)).collect())
}

fn randomize<M: Parameters<f64>>(model: &mut M, amplitude: f64, rng: &mut impl Rng) {
    model.visit_mut(&mut |_, p| p.iter_mut().for_each(|v| *v = rng.gen_range(-amplitude..amplitude)));
}

fn tiny_rrdb() -> RrdbConfig {
    RrdbConfig {
        l: 1,
        features: 4,
        growth: 2,
        beta: 0.2,
        dense_convs: 5,
        blocks_per_rrdb: 3,
    }
}

fn tiny_codec() -> CodecConfig {
    CodecConfig {
        base_latent_channels: 2,
        enh_latent_channels: 2,
        downsample_factor: 4,
        hidden_channels: 4,
        lambda_base: 0.01,
        symbol_range: 64,
    }
}

/// `0.5 Σ (x + r(x) − t)²`, the data term used for post-processor training
/// up to a constant factor.
fn rrdb_loss(model: &Rrdb<f64>, x: &Tensor<f64>, t: &Tensor<f64>) -> f64 {
    let r = model.residual(x);
    (0..x.data.len())
        .map(|i| {
            let d = x.data[i] + r.data[i] - t.data[i];
            0.5 * d * d
        })
        .sum()
}

fn check_rrdb(model: &Rrdb<f64>, rng: &mut impl Rng, tally: &mut Tally, with_input: bool) {
    let x = random_tensor(3, 8, 8, 0.0, 1.0, rng);
    let t = random_tensor(3, 8, 8, 0.0, 1.0, rng);
    let (r, cache) = model.forward_train(&x);
    let mut dr = r.clone();
    for i in 0..dr.data.len() {
        dr.data[i] = x.data[i] + r.data[i] - t.data[i];
    }
    let mut grad = model.zeros_like();
    let mut dx = model.backward(&cache, &dr, &mut grad, true).expect("input gradient");
    dx.add_assign(&dr);
    check_parameters(model, &grad, |m| rrdb_loss(m, &x, &t), tally);
    if with_input {
        check_input(&x, &dx, |xi| rrdb_loss(model, xi, &t), tally);
    }
}

fn check_base(layer: &BaseLayer<f64>, rng: &mut impl Rng, tally: &mut Tally) {
    let x = random_tensor(3, 8, 8, 0.0, 1.0, rng);
    let noise = uniform_noise::<f64>(2, 2, 2, rng);
    let lambda = 0.01;
    let mut grad = layer.zeros_like();
    layer.loss(&x, lambda, &noise, Some(&mut grad), 1.0);
    check_parameters(layer, &grad, |m| m.loss(&x, lambda, &noise, None, 1.0).loss, tally);
}

/// Runs one gradient check on a seeded tiny instance.
pub fn grad_check(target: GradCheckTarget, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    match target {
        GradCheckTarget::Rrdb => {
            let mut model = Rrdb::<f64>::new(&tiny_rrdb(), &mut rng);
            randomize(&mut model, 0.3, &mut rng);
            check_rrdb(&model, &mut rng, &mut tally, true);
        }
        GradCheckTarget::ZeroRrdb => {
            let mut model = Rrdb::<f64>::new(&tiny_rrdb(), &mut rng);
            model.fill_zero();
            check_rrdb(&model, &mut rng, &mut tally, false);
        }
        GradCheckTarget::CodecBase => {
            let mut layer = BaseLayer::<f64>::new(&tiny_codec(), &mut rng);
            randomize(&mut layer.prior, 0.5, &mut rng);
            check_base(&layer, &mut rng, &mut tally);
        }
        GradCheckTarget::ZeroCodec => {
            let mut layer = BaseLayer::<f64>::new(&tiny_codec(), &mut rng);
            layer.fill_zero();
            check_base(&layer, &mut rng, &mut tally);
        }
        GradCheckTarget::CodecEnh => {
            let mut layer = EnhLayer::<f64>::new(&tiny_codec(), &mut rng);
            randomize(&mut layer.prior, 0.5, &mut rng);
            let x = random_tensor(3, 8, 8, 0.0, 1.0, &mut rng);
            let machine = random_tensor(3, 8, 8, 0.0, 1.0, &mut rng);
            let noise = uniform_noise::<f64>(2, 2, 2, &mut rng);
            let lambda = 0.02;
            let mut grad = layer.zeros_like();
            layer.loss(&x, &machine, lambda, &noise, Some(&mut grad), 1.0);
            check_parameters(
                &layer,
                &grad,
                |m| m.loss(&x, &machine, lambda, &noise, None, 1.0).loss,
                &mut tally,
            );
        }
        GradCheckTarget::Rate => {
            let mut prior = LogisticPrior::<f64>::new(3);
            randomize(&mut prior, 0.8, &mut rng);
            let y = random_tensor(3, 3, 3, -4.0, 4.0, &mut rng);
            let mut grad = prior.zeros_like();
            let mut dy = vec![0.0; y.data.len()];
            prior.rate_backward(&y, 1.0, &mut grad, &mut dy);
            check_parameters(&prior, &grad, |m| m.rate(&y), &mut tally);
            let dy = Tensor::from_vec(3, 3, 3, dy);
            check_input(&y, &dy, |yi| prior.rate(yi), &mut tally);
        }
    }
    tally.report(target)
}

/// Largest deviation between the analytic derivative of `−log2 p` and the
/// closed form `−1 / (p ln 2)`, and between the closed form and central
/// differences, over the probabilities of a two-symbol model.
pub fn two_symbol_rate_check(probabilities: &[f64]) -> f64 {
    let closed = |p: f64| -1.0 / (p * std::f64::consts::LN_2);
    let h = 1e-7;
    probabilities
        .iter()
        .flat_map(|&p| {
            let analytic = neg_log2(p).1;
            let numeric = (neg_log2(p + h).0 - neg_log2(p - h).0) / (2.0 * h);
            [(analytic - closed(p)).abs(), (numeric - closed(p)).abs()]
        })
        .fold(0.0, f64::max)
}
