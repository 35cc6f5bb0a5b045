//! Procedural toy corpus: smooth gradients, soft-edged shapes, gratings and
//! low-amplitude texture. Stands in for a photographic dataset when none is
//! available; any directory of PNGs can be used instead.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Image;
use crate::error::{Error, Result};

fn smoothstep(edge: f32, d: f32) -> f32 {
    // coverage of a 1.5 px wide anti-aliased edge at signed distance d
    (0.5 - d / edge).clamp(0.0, 1.0)
}

fn color(rng: &mut ChaCha8Rng) -> [f32; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

enum Shape {
    Disc { cx: f32, cy: f32, r: f32 },
    Ellipse { cx: f32, cy: f32, rx: f32, ry: f32, cos: f32, sin: f32 },
    Rect { cx: f32, cy: f32, hw: f32, hh: f32, cos: f32, sin: f32 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, w: f32, h: f32) -> Shape {
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        let scale = w.min(h);
        let angle: f32 = rng.gen_range(0.0..std::f32::consts::PI);
        match rng.gen_range(0..3) {
            0 => Shape::Disc {
                cx,
                cy,
                r: rng.gen_range(0.05..0.3) * scale,
            },
            1 => Shape::Ellipse {
                cx,
                cy,
                rx: rng.gen_range(0.05..0.35) * scale,
                ry: rng.gen_range(0.03..0.2) * scale,
                cos: angle.cos(),
                sin: angle.sin(),
            },
            _ => Shape::Rect {
                cx,
                cy,
                hw: rng.gen_range(0.05..0.35) * scale,
                hh: rng.gen_range(0.03..0.25) * scale,
                cos: angle.cos(),
                sin: angle.sin(),
            },
        }
    }

    /// Approximate signed distance (negative inside).
    fn distance(&self, x: f32, y: f32) -> f32 {
        match *self {
            Shape::Disc { cx, cy, r } => ((x - cx).hypot(y - cy)) - r,
            Shape::Ellipse { cx, cy, rx, ry, cos, sin } => {
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                let k = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
                (k - 1.0) * rx.min(ry)
            }
            Shape::Rect { cx, cy, hw, hh, cos, sin } => {
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                (u.abs() - hw).max(v.abs() - hh)
            }
        }
    }
}

/// One deterministic synthetic image for `seed`.
pub fn synthetic_image(seed: u64, width: usize, height: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (wf, hf) = (width as f32, height as f32);
    let corners = [color(&mut rng), color(&mut rng), color(&mut rng), color(&mut rng)];
    let mut px = vec![[0.0f32; 3]; width * height];
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (x as f32 / wf, y as f32 / hf);
            let p = &mut px[y * width + x];
            for c in 0..3 {
                p[c] = corners[0][c] * (1.0 - u) * (1.0 - v)
                    + corners[1][c] * u * (1.0 - v)
                    + corners[2][c] * (1.0 - u) * v
                    + corners[3][c] * u * v;
            }
        }
    }
    let n_shapes = rng.gen_range(4..10);
    for _ in 0..n_shapes {
        let shape = Shape::random(&mut rng, wf, hf);
        let fill = color(&mut rng);
        let alpha: f32 = rng.gen_range(0.6..1.0);
        // some shapes carry a grating texture
        let grating = if rng.gen_bool(0.35) {
            let theta: f32 = rng.gen_range(0.0..std::f32::consts::PI);
            let period: f32 = rng.gen_range(3.0..12.0);
            Some((theta.cos(), theta.sin(), period, rng.gen_range(0.1..0.35f32)))
        } else {
            None
        };
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f32 + 0.5, y as f32 + 0.5);
                let cover = smoothstep(1.5, shape.distance(xf, yf)) * alpha;
                if cover <= 0.0 {
                    continue;
                }
                let mut col = fill;
                if let Some((gc, gs, period, amp)) = grating {
                    let t = ((xf * gc + yf * gs) / period * std::f32::consts::TAU).sin() * amp;
                    col.iter_mut().for_each(|v| *v += t);
                }
                let p = &mut px[y * width + x];
                for c in 0..3 {
                    p[c] = p[c] * (1.0 - cover) + col[c] * cover;
                }
            }
        }
    }
    // low-amplitude texture: coarse value noise plus a little pixel noise
    let cell = 8usize;
    let (gw, gh) = (width / cell + 2, height / cell + 2);
    let lattice: Vec<f32> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let amp: f32 = rng.gen_range(0.01..0.05);
    let grain: f32 = rng.gen_range(0.0..0.015);
    let mut data = vec![0.0f32; 3 * width * height];
    for y in 0..height {
        for x in 0..width {
            let (gx, gy) = (x as f32 / cell as f32, y as f32 / cell as f32);
            let (ix, iy) = (gx as usize, gy as usize);
            let (fx, fy) = (gx - ix as f32, gy - iy as f32);
            let l = |i: usize, j: usize| lattice[j * gw + i];
            let n = l(ix, iy) * (1.0 - fx) * (1.0 - fy)
                + l(ix + 1, iy) * fx * (1.0 - fy)
                + l(ix, iy + 1) * (1.0 - fx) * fy
                + l(ix + 1, iy + 1) * fx * fy;
            for c in 0..3 {
                let g: f32 = rng.gen_range(-1.0..1.0);
                let v = px[y * width + x][c] + amp * n + grain * g;
                data[(c * height + y) * width + x] = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
        }
    }
    Image::from_clamped(width, height, data)
}

/// Writes `count` synthetic PNGs named `synth_NNNNN.png` into `dir`.
pub fn write_synthetic_corpus(
    dir: impl AsRef<Path>,
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("synth_{i:05}.png"));
            synthetic_image(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64), width, height)
                .save_png(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_image(5, 32, 24);
        let b = synthetic_image(5, 32, 24);
        assert_eq!(a, b);
        assert_ne!(a, synthetic_image(6, 32, 24));
        assert_eq!(a.dims(), (32, 24));
        // samples are exact 8-bit code values
        assert!(a.samples().iter().all(|&v| ((v * 255.0).round() / 255.0 - v).abs() < 1e-7));
    }
}
