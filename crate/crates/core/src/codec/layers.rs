//! Trainable base (machine) and enhancement (human) layers.

use rand::Rng;

use super::prior::LogisticPrior;
use super::transform::{Analysis, Synthesis};
use super::CodecConfig;
use crate::nn::{Parameters, Real, Tensor};

/// Loss components of one training sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    /// `bpp + λ · mse`
    pub loss: f64,
    /// Rate in bits per pixel (estimated from the noisy latent).
    pub bpp: f64,
    /// Distortion in the 255-scaled domain.
    pub mse: f64,
}

impl LossParts {
    pub fn add(&mut self, o: &LossParts) {
        self.loss += o.loss;
        self.bpp += o.bpp;
        self.mse += o.mse;
    }

    pub fn scaled(&self, s: f64) -> LossParts {
        LossParts {
            loss: self.loss * s,
            bpp: self.bpp * s,
            mse: self.mse * s,
        }
    }
}

const PEAK2: f64 = 255.0 * 255.0;

pub fn uniform_noise<R: Real>(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> Tensor<R> {
    Tensor::from_vec(
        c,
        h,
        w,
        (0..c * h * w)
            .map(|_| R::lit(super::latent::uniform_open_half(rng)))
            .collect(),
    )
}

/// Shared tail of both layers: rate + distortion and their gradients.
/// `recon` is the (unclamped) reconstruction; returns the loss parts and
/// the gradient with respect to `recon` (scaled by `scale`).
fn distortion<R: Real>(recon: &Tensor<R>, target: &Tensor<R>, lambda: f64, scale: R) -> (f64, Tensor<R>) {
    let n = recon.data.len() as f64;
    let mut sum = 0.0;
    let coeff = scale * R::lit(lambda * 2.0 * PEAK2 / n);
    let mut grad = Tensor::zeros(recon.channels, recon.height, recon.width);
    for ((g, &a), &b) in grad.data.iter_mut().zip(&recon.data).zip(&target.data) {
        let d = a - b;
        let df = d.to_f64_lossy();
        sum += df * df;
        *g = coeff * d;
    }
    (PEAK2 * sum / n, grad)
}

/// Base layer: encodes the image alone; its reconstruction feeds machines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLayer<R> {
    pub config: CodecConfig,
    pub analysis: Analysis<R>,
    pub synthesis: Synthesis<R>,
    pub prior: LogisticPrior<R>,
}

impl<R: Real> BaseLayer<R> {
    pub fn new(config: &CodecConfig, rng: &mut impl Rng) -> Self {
        let (h, c, s) = (config.hidden_channels, config.base_latent_channels, config.stages());
        BaseLayer {
            config: config.clone(),
            analysis: Analysis::new(3, h, c, s, rng),
            synthesis: Synthesis::new(c, h, 3, s, rng),
            prior: LogisticPrior::new(c),
        }
    }

    pub fn zeros_like(&self) -> Self {
        BaseLayer {
            config: self.config.clone(),
            analysis: self.analysis.zeros_like(),
            synthesis: self.synthesis.zeros_like(),
            prior: self.prior.zeros_like(),
        }
    }

    /// Continuous latent of an image tensor whose sides are multiples of the
    /// downsampling factor.
    pub fn analyze(&self, x: &Tensor<R>) -> Tensor<R> {
        self.analysis.forward(&x.map(|v| v - R::lit(0.5)))
    }

    /// Unclamped reconstruction from a (quantized) latent.
    pub fn synthesize(&self, y: &Tensor<R>) -> Tensor<R> {
        self.synthesis.forward(y).map(|v| v + R::lit(0.5))
    }

    /// Rate-distortion loss with a given quantization-noise sample; when
    /// `grad` is given, accumulates `scale · ∂loss/∂θ` into it.
    pub fn loss(&self, x: &Tensor<R>, lambda: f64, noise: &Tensor<R>, grad: Option<&mut Self>, scale: R) -> LossParts {
        let pixels = (x.height * x.width) as f64;
        let (y, acache) = self.analysis.forward_train(&x.map(|v| v - R::lit(0.5)));
        let mut yt = y;
        yt.add_assign(noise);
        let (mut recon, scache) = self.synthesis.forward_train(&yt);
        recon.data.iter_mut().for_each(|v| *v += R::lit(0.5));
        let (mse, drecon) = distortion(&recon, x, lambda, scale);
        let bits = match grad {
            None => self.prior.rate(&yt).to_f64_lossy(),
            Some(g) => {
                let mut dy = self.synthesis.backward(&scache, drecon, &mut g.synthesis);
                let bits = self
                    .prior
                    .rate_backward(&yt, scale / R::lit(pixels), &mut g.prior, &mut dy.data);
                self.analysis.backward(&acache, dy, &mut g.analysis, false);
                bits.to_f64_lossy()
            }
        };
        let bpp = bits / pixels;
        LossParts {
            loss: bpp + lambda * mse,
            bpp,
            mse,
        }
    }

    /// One stochastic training sample: draws fresh noise, accumulates
    /// gradients.
    pub fn train_sample(&self, x: &Tensor<R>, lambda: f64, rng: &mut impl Rng, grad: &mut Self, scale: R) -> LossParts {
        let (h, w) = self.config.latent_dims(x.width, x.height);
        let noise = uniform_noise(self.config.base_latent_channels, h, w, rng);
        self.loss(x, lambda, &noise, Some(grad), scale)
    }
}

impl<R: Real> Parameters<R> for BaseLayer<R> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        self.analysis.visit("analysis", f);
        self.synthesis.visit("synthesis", f);
        self.prior.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [R])) {
        self.analysis.visit_mut("analysis", f);
        self.synthesis.visit_mut("synthesis", f);
        self.prior.visit_mut(f);
    }
}

/// Enhancement layer: its encoder sees `(original, machine reconstruction)`;
/// its decoder adds a residual decoded from the enhancement latent to the
/// machine reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhLayer<R> {
    pub config: CodecConfig,
    pub analysis: Analysis<R>,
    pub synthesis: Synthesis<R>,
    pub prior: LogisticPrior<R>,
}

impl<R: Real> EnhLayer<R> {
    pub fn new(config: &CodecConfig, rng: &mut impl Rng) -> Self {
        let (h, c, s) = (config.hidden_channels, config.enh_latent_channels, config.stages());
        EnhLayer {
            config: config.clone(),
            analysis: Analysis::new(6, h, c, s, rng),
            synthesis: Synthesis::new(c, h, 3, s, rng),
            prior: LogisticPrior::new(c),
        }
    }

    pub fn zeros_like(&self) -> Self {
        EnhLayer {
            config: self.config.clone(),
            analysis: self.analysis.zeros_like(),
            synthesis: self.synthesis.zeros_like(),
            prior: self.prior.zeros_like(),
        }
    }

    fn encoder_input(x: &Tensor<R>, machine: &Tensor<R>) -> Tensor<R> {
        let half = R::lit(0.5);
        x.map(|v| v - half).concat(&machine.map(|v| v - half))
    }

    pub fn analyze(&self, x: &Tensor<R>, machine: &Tensor<R>) -> Tensor<R> {
        self.analysis.forward(&Self::encoder_input(x, machine))
    }

    /// Unclamped human reconstruction.
    pub fn synthesize(&self, machine: &Tensor<R>, z: &Tensor<R>) -> Tensor<R> {
        let mut out = self.synthesis.forward(z);
        out.add_assign(machine);
        out
    }

    pub fn loss(
        &self,
        x: &Tensor<R>,
        machine: &Tensor<R>,
        lambda: f64,
        noise: &Tensor<R>,
        grad: Option<&mut Self>,
        scale: R,
    ) -> LossParts {
        let pixels = (x.height * x.width) as f64;
        let (z, acache) = self.analysis.forward_train(&Self::encoder_input(x, machine));
        let mut zt = z;
        zt.add_assign(noise);
        let (mut recon, scache) = self.synthesis.forward_train(&zt);
        recon.add_assign(machine);
        let (mse, drecon) = distortion(&recon, x, lambda, scale);
        let bits = match grad {
            None => self.prior.rate(&zt).to_f64_lossy(),
            Some(g) => {
                let mut dz = self.synthesis.backward(&scache, drecon, &mut g.synthesis);
                let bits = self
                    .prior
                    .rate_backward(&zt, scale / R::lit(pixels), &mut g.prior, &mut dz.data);
                self.analysis.backward(&acache, dz, &mut g.analysis, false);
                bits.to_f64_lossy()
            }
        };
        let bpp = bits / pixels;
        LossParts {
            loss: bpp + lambda * mse,
            bpp,
            mse,
        }
    }

    pub fn train_sample(
        &self,
        x: &Tensor<R>,
        machine: &Tensor<R>,
        lambda: f64,
        rng: &mut impl Rng,
        grad: &mut Self,
        scale: R,
    ) -> LossParts {
        let (h, w) = self.config.latent_dims(x.width, x.height);
        let noise = uniform_noise(self.config.enh_latent_channels, h, w, rng);
        self.loss(x, machine, lambda, &noise, Some(grad), scale)
    }
}

impl<R: Real> Parameters<R> for EnhLayer<R> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        self.analysis.visit("analysis", f);
        self.synthesis.visit("synthesis", f);
        self.prior.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [R])) {
        self.analysis.visit_mut("analysis", f);
        self.synthesis.visit_mut("synthesis", f);
        self.prior.visit_mut(f);
    }
}
