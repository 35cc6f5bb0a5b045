//! Differentiable factorized rate model: one discretized logistic density
//! per latent channel, with learned location and log-scale.

use super::EntropyModel;
use crate::error::Result;
use crate::nn::{Parameters, Real, Tensor};

/// Likelihood floor; below it the rate saturates and gradients vanish.
pub const LIKELIHOOD_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPrior<R> {
    pub loc: Vec<R>,
    pub log_scale: Vec<R>,
}

#[inline]
fn sigmoid<R: Real>(z: R) -> R {
    R::one() / (R::one() + (-z).exp())
}

/// `-log2 p` and its derivative with respect to `p`.
#[inline]
pub fn neg_log2<R: Real>(p: R) -> (R, R) {
    let ln2 = R::lit(std::f64::consts::LN_2);
    (-p.ln() / ln2, -R::one() / (p * ln2))
}

/// Mass of `[y - 1/2, y + 1/2]` under a logistic with location `loc` and
/// scale `exp(log_scale)`, with derivatives `(dp/dy, dp/dlog_scale)`.
/// `dp/dloc = -dp/dy`.
#[inline]
pub fn interval_mass<R: Real>(y: R, loc: R, log_scale: R) -> (R, R, R) {
    let half = R::lit(0.5);
    let d = y - loc;
    let inv = (-log_scale).exp();
    let a = (d + half) * inv;
    let b = (d - half) * inv;
    // evaluate in the tail closest to zero to avoid cancellation
    let p = if d > R::zero() {
        sigmoid(-b) - sigmoid(-a)
    } else {
        sigmoid(a) - sigmoid(b)
    };
    let sa = sigmoid(a);
    let sb = sigmoid(b);
    let ga = sa * (R::one() - sa);
    let gb = sb * (R::one() - sb);
    (p, (ga - gb) * inv, -(ga * a - gb * b))
}

impl<R: Real> LogisticPrior<R> {
    pub fn new(channels: usize) -> Self {
        LogisticPrior {
            loc: vec![R::zero(); channels],
            log_scale: vec![R::zero(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.loc.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::new(self.channels())
    }

    /// Total bits of `y` (noisy or rounded latent).
    pub fn rate(&self, y: &Tensor<R>) -> R {
        let plane = y.plane_len();
        let floor = R::lit(LIKELIHOOD_FLOOR);
        y.data
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i / plane;
                let (p, _, _) = interval_mass(v, self.loc[c], self.log_scale[c]);
                neg_log2(p.max(floor)).0
            })
            .sum()
    }

    /// Bits of `y`; accumulates `weight · ∂bits/∂θ` into `grad` and
    /// `weight · ∂bits/∂y` into `dy`.
    pub fn rate_backward(&self, y: &Tensor<R>, weight: R, grad: &mut Self, dy: &mut [R]) -> R {
        let plane = y.plane_len();
        let floor = R::lit(LIKELIHOOD_FLOOR);
        let mut bits = R::zero();
        for (i, &v) in y.data.iter().enumerate() {
            let c = i / plane;
            let (p, dp_dy, dp_dls) = interval_mass(v, self.loc[c], self.log_scale[c]);
            if p < floor {
                bits += neg_log2(floor).0;
                continue;
            }
            let (b, db_dp) = neg_log2(p);
            bits += b;
            let g = weight * db_dp;
            dy[i] += g * dp_dy;
            grad.loc[c] -= g * dp_dy;
            grad.log_scale[c] += g * dp_dls;
        }
        bits
    }

    /// Freezes the densities into integer tables over `-bound..=bound`,
    /// with the remaining tail mass assigned to the escape symbol.
    pub fn to_entropy_model(&self, bound: i32) -> Result<EntropyModel> {
        let pmfs: Vec<Vec<f64>> = (0..self.channels())
            .map(|c| {
                let (loc, ls) = (self.loc[c].to_f64_lossy(), self.log_scale[c].to_f64_lossy());
                let mut pmf: Vec<f64> = (-bound..=bound)
                    .map(|v| interval_mass(v as f64, loc, ls).0.max(0.0))
                    .collect();
                let inside: f64 = pmf.iter().sum();
                pmf.push((1.0 - inside).max(0.0));
                pmf
            })
            .collect();
        EntropyModel::from_probabilities(bound, &pmfs)
    }
}

impl<R: Real> Parameters<R> for LogisticPrior<R> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        f("prior.loc", &[self.loc.len()], &self.loc);
        f("prior.log_scale", &[self.log_scale.len()], &self.log_scale);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [R])) {
        f("prior.loc", &mut self.loc);
        f("prior.log_scale", &mut self.log_scale);
    }
}
