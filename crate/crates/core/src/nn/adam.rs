use super::{Parameters, Real};

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<R> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<R>,
    second: Vec<R>,
}

impl<R: Real> Adam<R> {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step<M: Parameters<R>>(&mut self, model: &mut M, grad: &M) {
        let g = grad.flatten();
        if self.first.is_empty() {
            self.first = vec![R::zero(); g.len()];
            self.second = vec![R::zero(); g.len()];
        }
        assert_eq!(self.first.len(), g.len(), "optimizer state does not match model");
        self.step += 1;
        let (b1, b2) = (R::lit(self.beta1), R::lit(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let lr = R::lit(self.learning_rate * c2.sqrt() / c1);
        let eps = R::lit(self.eps * c2.sqrt());
        let one = R::one();
        let mut i = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        model.visit_mut(&mut |_, params| {
            for p in params.iter_mut() {
                let gi = g[i];
                first[i] = b1 * first[i] + (one - b1) * gi;
                second[i] = b2 * second[i] + (one - b2) * gi * gi;
                *p -= lr * first[i] / (second[i].sqrt() + eps);
                i += 1;
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Conv2d;

    struct Quad(Conv2d<f64>);

    impl Parameters<f64> for Quad {
        fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
            crate::nn::params::visit_conv("c", &self.0, f)
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
            crate::nn::params::visit_conv_mut("c", &mut self.0, f)
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut m = Quad(Conv2d::new(1, 1, 1, 1));
        m.0.weight[0] = 3.0;
        m.0.bias[0] = -2.0;
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let mut g = Quad(m.0.zeros_like());
            g.0.weight[0] = 2.0 * (m.0.weight[0] - 1.0);
            g.0.bias[0] = 2.0 * m.0.bias[0];
            opt.step(&mut m, &g);
        }
        assert!((m.0.weight[0] - 1.0).abs() < 1e-3);
        assert!(m.0.bias[0].abs() < 1e-3);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut m = Quad(Conv2d::new(1, 2, 3, 1));
        m.0.weight.iter_mut().enumerate().for_each(|(i, w)| *w = i as f64);
        let before = m.flatten();
        let mut opt = Adam::new(1e-3);
        let g = Quad(m.0.zeros_like());
        opt.step(&mut m, &g);
        assert_eq!(m.flatten(), before);
    }
}
