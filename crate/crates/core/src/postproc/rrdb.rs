//! Residual-in-residual dense block network.
//!
//! ```text
//! x ─ head ─┬─ RRDB × l ─ trunk ─(+)─ tail ─ r        output = x + r
//!           └────────────────────┘
//! ```
//!
//! A dense block keeps all of its intermediate features in one channel
//! buffer; convolution `k` reads the first `F + k·G` channels of it, so its
//! patch matrix is a prefix of the block's shared patch matrix.

use rand::Rng;

use super::RrdbConfig;
use crate::nn::act::{leaky_relu_backward, leaky_relu_inplace};
use crate::nn::conv::{col2im_add, im2col, Geometry};
use crate::nn::params::{visit_conv, visit_conv_mut};
use crate::nn::{Conv2d, Parameters, Real, Tensor};

fn same_geometry(height: usize, width: usize) -> Geometry {
    Geometry {
        height,
        width,
        kernel: 3,
        stride: 1,
        pad: 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock<R> {
    pub convs: Vec<Conv2d<R>>,
    features: usize,
    growth: usize,
    beta: f64,
}

pub struct DenseCache<R> {
    feat: Vec<R>,
    col: Vec<R>,
}

impl<R: Real> DenseBlock<R> {
    fn new(features: usize, growth: usize, convs: usize, beta: f64, rng: &mut impl Rng) -> Self {
        let convs = (0..convs)
            .map(|k| {
                let last = k + 1 == convs;
                let mut c = Conv2d::new(features + k * growth, if last { features } else { growth }, 3, 1);
                c.init_uniform(rng, 0.1);
                c
            })
            .collect();
        DenseBlock {
            convs,
            features,
            growth,
            beta,
        }
    }

    fn zeros_like(&self) -> Self {
        DenseBlock {
            convs: self.convs.iter().map(Conv2d::zeros_like).collect(),
            ..*self
        }
    }

    fn buffer_channels(&self) -> usize {
        self.features + (self.convs.len() - 1) * self.growth
    }

    fn forward(&self, u: &Tensor<R>, keep: bool) -> (Tensor<R>, Option<DenseCache<R>>) {
        let (f, g) = (self.features, self.growth);
        let p = u.plane_len();
        let geo = same_geometry(u.height, u.width);
        let total = self.buffer_channels();
        let mut feat = vec![R::zero(); total * p];
        feat[..f * p].copy_from_slice(&u.data);
        let mut col = vec![R::zero(); 9 * total * p];
        im2col(&feat[..f * p], geo, &mut col[..9 * f * p]);
        let mut out = Tensor::zeros(f, u.height, u.width);
        let d = self.convs.len();
        for (k, conv) in self.convs.iter().enumerate() {
            let cin = f + k * g;
            if k + 1 < d {
                let chunk = &mut feat[cin * p..(cin + g) * p];
                conv.forward_col(&col[..9 * cin * p], p, chunk);
                leaky_relu_inplace(chunk);
                im2col(chunk, geo, &mut col[9 * cin * p..9 * (cin + g) * p]);
            } else {
                conv.forward_col(&col[..9 * cin * p], p, &mut out.data);
            }
        }
        let beta = R::lit(self.beta);
        for (o, &x) in out.data.iter_mut().zip(&u.data) {
            *o = x + beta * *o;
        }
        (out, keep.then_some(DenseCache { feat, col }))
    }

    fn backward(&self, cache: &DenseCache<R>, dout: &Tensor<R>, grad: &mut Self) -> Tensor<R> {
        let (f, g) = (self.features, self.growth);
        let p = dout.plane_len();
        let geo = same_geometry(dout.height, dout.width);
        let total = self.buffer_channels();
        let mut dfeat = vec![R::zero(); total * p];
        let mut dcol = vec![R::zero(); 9 * total * p];
        let beta = R::lit(self.beta);
        let dlast: Vec<R> = dout.data.iter().map(|&v| beta * v).collect();
        let d = self.convs.len();
        for k in (0..d).rev() {
            let cin = f + k * g;
            let dy: &[R] = if k + 1 == d {
                &dlast
            } else {
                // every consumer of chunk k has already pushed its gradient
                let chunk = &mut dfeat[cin * p..(cin + g) * p];
                col2im_add(&dcol[9 * cin * p..9 * (cin + g) * p], geo, chunk);
                leaky_relu_backward(&cache.feat[cin * p..(cin + g) * p], chunk);
                &dfeat[cin * p..(cin + g) * p]
            };
            self.convs[k].backward_col(
                &cache.col[..9 * cin * p],
                dy,
                p,
                &mut grad.convs[k],
                Some(&mut dcol[..9 * cin * p]),
            );
        }
        let mut du = dout.clone();
        col2im_add(&dcol[..9 * f * p], geo, &mut du.data);
        du
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrdbBlock<R> {
    pub dense: Vec<DenseBlock<R>>,
    beta: f64,
}

impl<R: Real> RrdbBlock<R> {
    fn forward(&self, u: &Tensor<R>, keep: bool) -> (Tensor<R>, Vec<DenseCache<R>>) {
        let mut caches = Vec::new();
        let mut v = u.clone();
        for db in &self.dense {
            let (o, c) = db.forward(&v, keep);
            v = o;
            caches.extend(c);
        }
        let beta = R::lit(self.beta);
        for (o, &x) in v.data.iter_mut().zip(&u.data) {
            *o = x + beta * *o;
        }
        (v, caches)
    }

    fn backward(&self, caches: &[DenseCache<R>], dout: &Tensor<R>, grad: &mut Self) -> Tensor<R> {
        let beta = R::lit(self.beta);
        let mut dv = dout.map(|v| beta * v);
        for i in (0..self.dense.len()).rev() {
            dv = self.dense[i].backward(&caches[i], &dv, &mut grad.dense[i]);
        }
        dv.add_assign(dout);
        dv
    }
}

/// The post-processing network; [`Rrdb::residual`] is the correction added
/// to the decoded image.
#[derive(Debug, Clone, PartialEq)]
pub struct Rrdb<R> {
    pub config: RrdbConfig,
    pub head: Conv2d<R>,
    pub blocks: Vec<RrdbBlock<R>>,
    pub trunk: Conv2d<R>,
    pub tail: Conv2d<R>,
}

pub struct RrdbCache<R> {
    input_shape: (usize, usize),
    head_col: Vec<R>,
    blocks: Vec<Vec<DenseCache<R>>>,
    trunk_col: Vec<R>,
    tail_col: Vec<R>,
}

impl<R: Real> Rrdb<R> {
    /// Seeded initialization. Dense convolutions get a 0.1-scaled He init;
    /// the tail starts at zero, so the residual is initially zero.
    pub fn new(config: &RrdbConfig, rng: &mut impl Rng) -> Self {
        let f = config.features;
        let mut head = Conv2d::new(3, f, 3, 1);
        head.init_uniform(rng, 1.0);
        let blocks = (0..config.l)
            .map(|_| RrdbBlock {
                dense: (0..config.blocks_per_rrdb)
                    .map(|_| DenseBlock::new(f, config.growth, config.dense_convs, config.beta, rng))
                    .collect(),
                beta: config.beta,
            })
            .collect();
        let mut trunk = Conv2d::new(f, f, 3, 1);
        trunk.init_uniform(rng, 1.0);
        Rrdb {
            config: config.clone(),
            head,
            blocks,
            trunk,
            tail: Conv2d::new(f, 3, 3, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Rrdb {
            config: self.config.clone(),
            head: self.head.zeros_like(),
            blocks: self
                .blocks
                .iter()
                .map(|b| RrdbBlock {
                    dense: b.dense.iter().map(DenseBlock::zeros_like).collect(),
                    beta: b.beta,
                })
                .collect(),
            trunk: self.trunk.zeros_like(),
            tail: self.tail.zeros_like(),
        }
    }

    fn run(&self, x: &Tensor<R>, keep: bool) -> (Tensor<R>, Option<RrdbCache<R>>) {
        assert_eq!(x.channels, 3, "post-processor input has 3 channels");
        let (f0, head_col) = self.head.forward(x);
        let mut t = f0.clone();
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let (o, c) = b.forward(&t, keep);
            t = o;
            blocks.push(c);
        }
        let (mut tr, trunk_col) = self.trunk.forward(&t);
        tr.add_assign(&f0);
        let (r, tail_col) = self.tail.forward(&tr);
        let cache = keep.then(|| RrdbCache {
            input_shape: (x.height, x.width),
            head_col,
            blocks,
            trunk_col,
            tail_col,
        });
        (r, cache)
    }

    /// Residual branch output for a `3 × H × W` input.
    pub fn residual(&self, x: &Tensor<R>) -> Tensor<R> {
        self.run(x, false).0
    }

    pub fn forward_train(&self, x: &Tensor<R>) -> (Tensor<R>, RrdbCache<R>) {
        let (r, c) = self.run(x, true);
        (r, c.expect("cache kept"))
    }

    /// Accumulates parameter gradients for `dr = ∂loss/∂residual`; returns
    /// the gradient with respect to the network input through the residual
    /// branch when `need_input` is set.
    pub fn backward(&self, cache: &RrdbCache<R>, dr: &Tensor<R>, grad: &mut Self, need_input: bool) -> Option<Tensor<R>> {
        let shape = cache.input_shape;
        let dtr = self
            .tail
            .backward(shape, &cache.tail_col, dr, &mut grad.tail, true)
            .expect("input gradient requested");
        let mut dt = self
            .trunk
            .backward(shape, &cache.trunk_col, &dtr, &mut grad.trunk, true)
            .expect("input gradient requested");
        for i in (0..self.blocks.len()).rev() {
            dt = self.blocks[i].backward(&cache.blocks[i], &dt, &mut grad.blocks[i]);
        }
        dt.add_assign(&dtr);
        self.head.backward(shape, &cache.head_col, &dt, &mut grad.head, need_input)
    }
}

impl<R: Real> Parameters<R> for Rrdb<R> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[R])) {
        visit_conv("head", &self.head, f);
        for (i, b) in self.blocks.iter().enumerate() {
            for (j, db) in b.dense.iter().enumerate() {
                for (k, c) in db.convs.iter().enumerate() {
                    visit_conv(&format!("rrdb.{i}.dense.{j}.conv.{k}"), c, f);
                }
            }
        }
        visit_conv("trunk", &self.trunk, f);
        visit_conv("tail", &self.tail, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [R])) {
        visit_conv_mut("head", &mut self.head, f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (j, db) in b.dense.iter_mut().enumerate() {
                for (k, c) in db.convs.iter_mut().enumerate() {
                    visit_conv_mut(&format!("rrdb.{i}.dense.{j}.conv.{k}"), c, f);
                }
            }
        }
        visit_conv_mut("trunk", &mut self.trunk, f);
        visit_conv_mut("tail", &mut self.tail, f);
    }
}
