use rand::Rng;

use crate::nn::{Real, Tensor};

/// A `C × h × w` latent grid. When `quantized`, every value is an integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    pub quantized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantMode {
    /// Additive uniform noise in (-0.5, 0.5); the training surrogate.
    Noise,
    /// Round half away from zero, then clamp to the symbol range.
    Round,
}

impl Latent {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), channels * height * width, "latent shape/data mismatch");
        Latent {
            channels,
            height,
            width,
            values,
            quantized: false,
        }
    }

    /// A quantized latent built from integer symbols.
    pub fn from_symbols(channels: usize, height: usize, width: usize, symbols: &[i32]) -> Self {
        let mut l = Latent::new(channels, height, width, symbols.iter().map(|&s| s as f32).collect());
        l.quantized = true;
        l
    }

    pub fn empty() -> Self {
        Latent::from_symbols(0, 0, 0, &[])
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_tensor<R: Real>(t: &Tensor<R>) -> Self {
        Latent::new(
            t.channels,
            t.height,
            t.width,
            t.data.iter().map(|v| v.to_f64_lossy() as f32).collect(),
        )
    }

    pub fn to_tensor<R: Real>(&self) -> Tensor<R> {
        Tensor::from_vec(
            self.channels,
            self.height,
            self.width,
            self.values.iter().map(|&v| R::lit(v as f64)).collect(),
        )
    }

    /// Integer symbols of a quantized latent.
    pub fn symbols(&self) -> Vec<i32> {
        self.values.iter().map(|&v| v as i32).collect()
    }
}

/// Element-wise rounding (ties away from zero) clamped to `[-bound, bound]`.
/// Idempotent.
pub fn quantize_round(latent: &Latent, bound: i32) -> Latent {
    let b = bound as f32;
    Latent {
        values: latent.values.iter().map(|v| v.round().clamp(-b, b)).collect(),
        quantized: true,
        ..latent.clone()
    }
}

/// Adds independent uniform noise in `(-0.5, 0.5)`.
pub fn quantize_noise(latent: &Latent, rng: &mut impl Rng) -> Latent {
    Latent {
        values: latent
            .values
            .iter()
            .map(|&v| v + uniform_open_half(rng) as f32)
            .collect(),
        quantized: false,
        ..latent.clone()
    }
}

/// Sample from the open interval (-0.5, 0.5).
pub fn uniform_open_half(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return u;
        }
    }
}

pub fn quantize(latent: &Latent, mode: QuantMode, bound: i32, rng: &mut impl Rng) -> Latent {
    match mode {
        QuantMode::Round => quantize_round(latent, bound),
        QuantMode::Noise => quantize_noise(latent, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rounding_definition() {
        let l = Latent::new(1, 1, 5, vec![0.4, -1.6, 2.5, -2.5, 100.0]);
        let q = quantize_round(&l, 64);
        assert_eq!(q.values, vec![0.0, -2.0, 3.0, -3.0, 64.0]);
        assert!(q.quantized);
    }

    proptest! {
        #[test]
        fn round_is_idempotent(v in proptest::collection::vec(-200.0f32..200.0, 1..50)) {
            let l = Latent::new(1, 1, v.len(), v);
            let once = quantize_round(&l, 64);
            prop_assert_eq!(quantize_round(&once, 64), once);
        }

        #[test]
        fn noise_is_bounded(v in proptest::collection::vec(-20.0f32..20.0, 1..50), seed in 0u64..1000) {
            let l = Latent::new(1, 1, v.len(), v);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = quantize(&l, QuantMode::Noise, 64, &mut rng);
            prop_assert!(!n.quantized);
            for (a, b) in n.values.iter().zip(&l.values) {
                prop_assert!((a - b).abs() < 0.5 + 1e-5);
            }
        }
    }
}
