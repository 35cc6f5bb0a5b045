//! Analysis (downsampling) and synthesis (sub-pixel upsampling) transforms.

use rand::Rng;

use crate::nn::act::{leaky_relu_backward, leaky_relu_inplace};
use crate::nn::params::{visit_conv, visit_conv_mut};
use crate::nn::shuffle::{depth_to_space, space_to_depth};
use crate::nn::{Conv2d, Real, Tensor};

struct StageCache<R> {
    input_shape: (usize, usize),
    col: Vec<R>,
    output: Tensor<R>,
}

pub struct TransformCache<R> {
    stages: Vec<StageCache<R>>,
}

/// Stack of stride-2 3×3 convolutions with leaky rectifiers in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis<R> {
    pub convs: Vec<Conv2d<R>>,
}

impl<R: Real> Analysis<R> {
    pub fn new(in_channels: usize, hidden: usize, out_channels: usize, stages: usize, rng: &mut impl Rng) -> Self {
        let convs = (0..stages)
            .map(|i| {
                let cin = if i == 0 { in_channels } else { hidden };
                let cout = if i + 1 == stages { out_channels } else { hidden };
                let mut c = Conv2d::new(cin, cout, 3, 2);
                c.init_uniform(rng, 1.0);
                c
            })
            .collect();
        Analysis { convs }
    }

    pub fn zeros_like(&self) -> Self {
        Analysis {
            convs: self.convs.iter().map(Conv2d::zeros_like).collect(),
        }
    }

    pub fn forward(&self, x: &Tensor<R>) -> Tensor<R> {
        let last = self.convs.len() - 1;
        let mut h = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.apply(&h);
            if i < last {
                leaky_relu_inplace(&mut h.data);
            }
        }
        h
    }

    pub fn forward_train(&self, x: &Tensor<R>) -> (Tensor<R>, TransformCache<R>) {
        let last = self.convs.len() - 1;
        let mut h = x.clone();
        let mut stages = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let shape = (h.height, h.width);
            let (mut o, col) = conv.forward(&h);
            if i < last {
                leaky_relu_inplace(&mut o.data);
            }
            h = o.clone();
            stages.push(StageCache {
                input_shape: shape,
                col,
                output: o,
            });
        }
        (h, TransformCache { stages })
    }

    pub fn backward(
        &self,
        cache: &TransformCache<R>,
        dy: Tensor<R>,
        grad: &mut Self,
        need_input: bool,
    ) -> Option<Tensor<R>> {
        let last = self.convs.len() - 1;
        let mut d = dy;
        for i in (0..self.convs.len()).rev() {
            let st = &cache.stages[i];
            if i < last {
                leaky_relu_backward(&st.output.data, &mut d.data);
            }
            let want = i > 0 || need_input;
            match self.convs[i].backward(st.input_shape, &st.col, &d, &mut grad.convs[i], want) {
                Some(dx) => d = dx,
                None => return None,
            }
        }
        Some(d)
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        for (i, c) in self.convs.iter().enumerate() {
            visit_conv(&format!("{prefix}.{i}"), c, f);
        }
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [R])) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            visit_conv_mut(&format!("{prefix}.{i}"), c, f);
        }
    }
}

/// Stack of 3×3 convolutions each followed by a 2× depth-to-space shuffle,
/// with leaky rectifiers between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis<R> {
    pub convs: Vec<Conv2d<R>>,
}

impl<R: Real> Synthesis<R> {
    pub fn new(in_channels: usize, hidden: usize, out_channels: usize, stages: usize, rng: &mut impl Rng) -> Self {
        let convs = (0..stages)
            .map(|i| {
                let cin = if i == 0 { in_channels } else { hidden };
                let cout = if i + 1 == stages { out_channels } else { hidden };
                let mut c = Conv2d::new(cin, 4 * cout, 3, 1);
                c.init_uniform(rng, if i + 1 == stages { 0.5 } else { 1.0 });
                c
            })
            .collect();
        Synthesis { convs }
    }

    pub fn zeros_like(&self) -> Self {
        Synthesis {
            convs: self.convs.iter().map(Conv2d::zeros_like).collect(),
        }
    }

    pub fn forward(&self, y: &Tensor<R>) -> Tensor<R> {
        let last = self.convs.len() - 1;
        let mut h = y.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            h = depth_to_space(&conv.apply(&h));
            if i < last {
                leaky_relu_inplace(&mut h.data);
            }
        }
        h
    }

    pub fn forward_train(&self, y: &Tensor<R>) -> (Tensor<R>, TransformCache<R>) {
        let last = self.convs.len() - 1;
        let mut h = y.clone();
        let mut stages = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let shape = (h.height, h.width);
            let (o, col) = conv.forward(&h);
            let mut u = depth_to_space(&o);
            if i < last {
                leaky_relu_inplace(&mut u.data);
            }
            h = u.clone();
            stages.push(StageCache {
                input_shape: shape,
                col,
                output: u,
            });
        }
        (h, TransformCache { stages })
    }

    /// Returns the gradient with respect to the synthesis input.
    pub fn backward(&self, cache: &TransformCache<R>, dx: Tensor<R>, grad: &mut Self) -> Tensor<R> {
        let last = self.convs.len() - 1;
        let mut d = dx;
        for i in (0..self.convs.len()).rev() {
            let st = &cache.stages[i];
            if i < last {
                leaky_relu_backward(&st.output.data, &mut d.data);
            }
            let dout = space_to_depth(&d);
            d = self.convs[i]
                .backward(st.input_shape, &st.col, &dout, &mut grad.convs[i], true)
                .expect("input gradient requested");
        }
        d
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        for (i, c) in self.convs.iter().enumerate() {
            visit_conv(&format!("{prefix}.{i}"), c, f);
        }
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [R])) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            visit_conv_mut(&format!("{prefix}.{i}"), c, f);
        }
    }
}
