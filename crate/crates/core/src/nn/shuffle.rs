//! Depth-to-space rearrangement (sub-pixel upsampling by 2).

use super::{Real, Tensor};

/// `(4C, h, w) -> (C, 2h, 2w)` with `out[c][2y+i][2x+j] = in[4c + 2i + j][y][x]`.
pub fn depth_to_space<R: Real>(x: &Tensor<R>) -> Tensor<R> {
    assert_eq!(x.channels % 4, 0, "depth_to_space needs a multiple of 4 channels");
    let (c, h, w) = (x.channels / 4, x.height, x.width);
    let mut out = Tensor::zeros(c, 2 * h, 2 * w);
    for oc in 0..c {
        for i in 0..2 {
            for j in 0..2 {
                let src = x.plane(4 * oc + 2 * i + j);
                let dst = out.plane_mut(oc);
                for y in 0..h {
                    let drow = (2 * y + i) * 2 * w;
                    for xx in 0..w {
                        dst[drow + 2 * xx + j] = src[y * w + xx];
                    }
                }
            }
        }
    }
    out
}

/// Adjoint (and inverse) of [`depth_to_space`].
pub fn space_to_depth<R: Real>(x: &Tensor<R>) -> Tensor<R> {
    assert!(x.height % 2 == 0 && x.width % 2 == 0);
    let (c, h, w) = (x.channels, x.height / 2, x.width / 2);
    let mut out = Tensor::zeros(4 * c, h, w);
    for ic in 0..c {
        for i in 0..2 {
            for j in 0..2 {
                let src = x.plane(ic);
                let dst = out.plane_mut(4 * ic + 2 * i + j);
                for y in 0..h {
                    let srow = (2 * y + i) * 2 * w;
                    for xx in 0..w {
                        dst[y * w + xx] = src[srow + 2 * xx + j];
                    }
                }
            }
        }
    }
    out
}
