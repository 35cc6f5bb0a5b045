//! 2-D convolution over planar feature maps, lowered to a matrix product via
//! an explicit patch matrix ("im2col").
//!
//! The patch matrix has one row per `(input channel, ky, kx)` triple, channel
//! major, and one column per output pixel. Because rows are channel major, the
//! patch matrix of the first `c` channels of a feature map is a contiguous
//! prefix of the full patch matrix; dense blocks exploit this to grow their
//! patch matrix incrementally.

use rand::Rng;

use super::{Real, Tensor};

/// Output extent of a convolution along one axis.
#[inline]
pub fn out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Geometry shared by the patch-matrix helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Geometry {
    pub fn out_height(&self) -> usize {
        out_extent(self.height, self.kernel, self.stride, self.pad)
    }

    pub fn out_width(&self) -> usize {
        out_extent(self.width, self.kernel, self.stride, self.pad)
    }

    pub fn out_pixels(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn rows_per_channel(&self) -> usize {
        self.kernel * self.kernel
    }

    /// Valid output columns `[lo, hi)` for kernel offset `k` along an axis of
    /// length `len` producing `out` samples.
    #[inline]
    fn valid_range(&self, k: usize, len: usize, out: usize) -> (usize, usize) {
        // input index = o * stride + k - pad must lie in [0, len)
        let s = self.stride;
        let lo = if k >= self.pad {
            0
        } else {
            (self.pad - k).div_ceil(s)
        };
        let hi = if len + self.pad <= k {
            0
        } else {
            ((len + self.pad - k - 1) / s + 1).min(out)
        };
        (lo.min(hi), hi)
    }
}

/// Writes the patch-matrix rows of `planes` (each `height × width`) into
/// `col`, which must hold `planes.len() / plane_len * k * k` rows.
pub fn im2col<R: Real>(planes: &[R], geo: Geometry, col: &mut [R]) {
    let plane_len = geo.height * geo.width;
    let channels = planes.len() / plane_len;
    let (oh, ow) = (geo.out_height(), geo.out_width());
    let p = oh * ow;
    let k = geo.kernel;
    debug_assert_eq!(col.len(), channels * k * k * p);
    for c in 0..channels {
        let src = &planes[c * plane_len..(c + 1) * plane_len];
        for ky in 0..k {
            let (ylo, yhi) = geo.valid_range(ky, geo.height, oh);
            for kx in 0..k {
                let (xlo, xhi) = geo.valid_range(kx, geo.width, ow);
                let row = (c * k + ky) * k + kx;
                let dst = &mut col[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if oy < ylo || oy >= yhi || xlo >= xhi {
                        drow.fill(R::zero());
                        continue;
                    }
                    let iy = oy * geo.stride + ky - geo.pad;
                    let srow = &src[iy * geo.width..(iy + 1) * geo.width];
                    drow[..xlo].fill(R::zero());
                    drow[xhi..].fill(R::zero());
                    if geo.stride == 1 {
                        let ix0 = xlo + kx - geo.pad;
                        drow[xlo..xhi].copy_from_slice(&srow[ix0..ix0 + (xhi - xlo)]);
                    } else {
                        for ox in xlo..xhi {
                            drow[ox] = srow[ox * geo.stride + kx - geo.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-matrix gradients back onto planes,
/// accumulating into `planes`.
pub fn col2im_add<R: Real>(col: &[R], geo: Geometry, planes: &mut [R]) {
    let plane_len = geo.height * geo.width;
    let channels = planes.len() / plane_len;
    let (oh, ow) = (geo.out_height(), geo.out_width());
    let p = oh * ow;
    let k = geo.kernel;
    debug_assert_eq!(col.len(), channels * k * k * p);
    for c in 0..channels {
        let dst = &mut planes[c * plane_len..(c + 1) * plane_len];
        for ky in 0..k {
            let (ylo, yhi) = geo.valid_range(ky, geo.height, oh);
            for kx in 0..k {
                let (xlo, xhi) = geo.valid_range(kx, geo.width, ow);
                if xlo >= xhi {
                    continue;
                }
                let row = (c * k + ky) * k + kx;
                let src = &col[row * p..(row + 1) * p];
                for oy in ylo..yhi {
                    let iy = oy * geo.stride + ky - geo.pad;
                    let drow = &mut dst[iy * geo.width..(iy + 1) * geo.width];
                    let srow = &src[oy * ow..(oy + 1) * ow];
                    if geo.stride == 1 {
                        let ix0 = xlo + kx - geo.pad;
                        for (d, &s) in drow[ix0..ix0 + (xhi - xlo)].iter_mut().zip(&srow[xlo..xhi]) {
                            *d += s;
                        }
                    } else {
                        for ox in xlo..xhi {
                            drow[ox * geo.stride + kx - geo.pad] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Square-kernel convolution with bias. Weights are laid out
/// `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<R> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<R>,
    pub bias: Vec<R>,
}

impl<R: Real> Conv2d<R> {
    /// `kernel × kernel` convolution with "same" padding.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad: kernel / 2,
            weight: vec![R::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![R::zero(); out_channels],
        }
    }

    /// He-uniform initialization for a leaky-ReLU successor, multiplied by
    /// `scale`. Biases start at zero.
    pub fn init_uniform(&mut self, rng: &mut impl Rng, scale: f64) {
        let fan_in = (self.in_channels * self.kernel * self.kernel) as f64;
        let bound = (6.0 / fan_in).sqrt() * scale;
        for w in &mut self.weight {
            *w = R::lit(rng.gen_range(-bound..bound));
        }
        self.bias.fill(R::zero());
    }

    pub fn zero(&mut self) {
        self.weight.fill(R::zero());
        self.bias.fill(R::zero());
    }

    pub fn patch_rows(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn geometry(&self, height: usize, width: usize) -> Geometry {
        Geometry {
            height,
            width,
            kernel: self.kernel,
            stride: self.stride,
            pad: self.pad,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// `out = W · col + b` where `col` holds at least `patch_rows()` rows of
    /// `pixels` columns; `out` is `out_channels × pixels`.
    pub fn forward_col(&self, col: &[R], pixels: usize, out: &mut [R]) {
        let k = self.patch_rows();
        debug_assert!(col.len() >= k * pixels);
        debug_assert_eq!(out.len(), self.out_channels * pixels);
        for (row, &b) in out.chunks_exact_mut(pixels).zip(&self.bias) {
            row.fill(b);
        }
        R::gemm(
            self.out_channels,
            k,
            pixels,
            R::one(),
            &self.weight,
            k as isize,
            1,
            col,
            pixels as isize,
            1,
            R::one(),
            out,
            pixels as isize,
            1,
        );
    }

    /// Accumulates parameter gradients into `grad` and, when given, the
    /// patch-matrix gradient into `dcol`.
    pub fn backward_col(
        &self,
        col: &[R],
        dout: &[R],
        pixels: usize,
        grad: &mut Conv2d<R>,
        dcol: Option<&mut [R]>,
    ) {
        let k = self.patch_rows();
        for (row, gb) in dout.chunks_exact(pixels).zip(grad.bias.iter_mut()) {
            *gb += row.iter().copied().sum::<R>();
        }
        R::gemm(
            self.out_channels,
            pixels,
            k,
            R::one(),
            dout,
            pixels as isize,
            1,
            col,
            1,
            pixels as isize,
            R::one(),
            &mut grad.weight,
            k as isize,
            1,
        );
        if let Some(dcol) = dcol {
            R::gemm(
                k,
                self.out_channels,
                pixels,
                R::one(),
                &self.weight,
                1,
                k as isize,
                dout,
                pixels as isize,
                1,
                R::one(),
                dcol,
                pixels as isize,
                1,
            );
        }
    }

    /// Convenience forward pass returning the output and the patch matrix
    /// needed by [`Conv2d::backward`].
    pub fn forward(&self, input: &Tensor<R>) -> (Tensor<R>, Vec<R>) {
        assert_eq!(input.channels, self.in_channels, "conv input channels");
        let geo = self.geometry(input.height, input.width);
        let (oh, ow) = (geo.out_height(), geo.out_width());
        let mut col = vec![R::zero(); self.patch_rows() * oh * ow];
        im2col(&input.data, geo, &mut col);
        let mut out = Tensor::zeros(self.out_channels, oh, ow);
        self.forward_col(&col, oh * ow, &mut out.data);
        (out, col)
    }

    /// Forward pass without retaining the patch matrix.
    pub fn apply(&self, input: &Tensor<R>) -> Tensor<R> {
        self.forward(input).0
    }

    /// Backward pass; returns the input gradient when `need_input` is set.
    pub fn backward(
        &self,
        input_shape: (usize, usize),
        col: &[R],
        dout: &Tensor<R>,
        grad: &mut Conv2d<R>,
        need_input: bool,
    ) -> Option<Tensor<R>> {
        let geo = self.geometry(input_shape.0, input_shape.1);
        let pixels = dout.plane_len();
        if !need_input {
            self.backward_col(col, &dout.data, pixels, grad, None);
            return None;
        }
        let mut dcol = vec![R::zero(); self.patch_rows() * pixels];
        self.backward_col(col, &dout.data, pixels, grad, Some(&mut dcol));
        let mut dinput = Tensor::zeros(self.in_channels, input_shape.0, input_shape.1);
        col2im_add(&dcol, geo, &mut dinput.data);
        Some(dinput)
    }

    pub fn zeros_like(&self) -> Self {
        Conv2d::new(self.in_channels, self.out_channels, self.kernel, self.stride)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct nested-loop convolution used as an oracle.
    fn naive(conv: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let geo = conv.geometry(x.height, x.width);
        let (oh, ow) = (geo.out_height(), geo.out_width());
        let k = conv.kernel;
        let mut out = Tensor::zeros(conv.out_channels, oh, ow);
        for o in 0..conv.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias[o];
                    for c in 0..conv.in_channels {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * conv.stride + ky) as isize - conv.pad as isize;
                                let ix = (ox * conv.stride + kx) as isize - conv.pad as isize;
                                if iy < 0 || ix < 0 || iy >= x.height as isize || ix >= x.width as isize {
                                    continue;
                                }
                                let w = conv.weight[((o * conv.in_channels + c) * k + ky) * k + kx];
                                acc += w * x.data[(c * x.height + iy as usize) * x.width + ix as usize];
                            }
                        }
                    }
                    out.data[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(stride, h, w) in &[(1, 5, 7), (2, 8, 8), (2, 7, 5), (1, 1, 1)] {
            let mut conv = Conv2d::<f64>::new(3, 4, 3, stride);
            conv.init_uniform(&mut rng, 1.0);
            for b in &mut conv.bias {
                *b = rng.gen_range(-1.0..1.0);
            }
            let x = random_tensor(&mut rng, 3, h, w);
            let got = conv.apply(&x);
            let want = naive(&conv, &x);
            assert_eq!((got.height, got.width), (want.height, want.width));
            for (a, b) in got.data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(stride, h, w) in &[(1, 6, 4), (2, 6, 6), (2, 5, 3)] {
            let geo = Geometry { height: h, width: w, kernel: 3, stride, pad: 1 };
            let x = random_tensor(&mut rng, 2, h, w);
            let rows = 2 * 9;
            let y: Vec<f64> = (0..rows * geo.out_pixels()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut col = vec![0.0; y.len()];
            im2col(&x.data, geo, &mut col);
            let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
            let mut back = vec![0.0; x.data.len()];
            col2im_add(&y, geo, &mut back);
            let rhs: f64 = back.iter().zip(&x.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
