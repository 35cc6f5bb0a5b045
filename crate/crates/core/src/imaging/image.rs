use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// An RGB image with samples in `[0, 1]`, stored as three planes
/// (`R`, `G`, `B`), each `height × width` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
    pub source_path: Option<String>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    /// Builds an image from planar samples, rejecting empty dimensions and
    /// samples outside `[0, 1]` (including NaN).
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty dimensions {width}x{height}")));
        }
        if data.len() != 3 * width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples for {width}x{height}x3, got {}",
                3 * width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            data,
            source_path: None,
        })
    }

    /// Builds an image, clamping every sample into `[0, 1]`. NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Self {
        assert!(width > 0 && height > 0 && data.len() == 3 * width * height);
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Image {
            width,
            height,
            data,
            source_path: None,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Image::from_clamped(width, height, vec![value; 3 * width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Image::from_clamped(width, height, data)
    }

    /// Clamped conversion from a 3-channel network tensor.
    pub fn from_tensor<R: Real>(t: &Tensor<R>) -> Self {
        assert_eq!(t.channels, 3, "image tensors have 3 channels");
        Image::from_clamped(
            t.width,
            t.height,
            t.data.iter().map(|v| v.to_f64_lossy() as f32).collect(),
        )
    }

    pub fn to_tensor<R: Real>(&self) -> Tensor<R> {
        Tensor::from_vec(
            3,
            self.height,
            self.width,
            self.data.iter().map(|&v| R::lit(v as f64)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Planar samples (`R` plane, then `G`, then `B`).
    pub fn samples(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Image {
        assert!(x0 + width <= self.width && y0 + height <= self.height, "crop out of bounds");
        Image::from_fn(width, height, |c, y, x| self.get(c, y0 + y, x0 + x))
    }

    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.width, self.height, |c, y, x| self.get(c, y, self.width - 1 - x))
    }

    /// Pads right and bottom by edge replication up to multiples of `multiple`.
    pub fn pad_to_multiple(&self, multiple: usize) -> Image {
        let w = self.width.div_ceil(multiple) * multiple;
        let h = self.height.div_ceil(multiple) * multiple;
        if (w, h) == (self.width, self.height) {
            return self.clone();
        }
        Image::from_fn(w, h, |c, y, x| {
            self.get(c, y.min(self.height - 1), x.min(self.width - 1))
        })
    }

    /// Rounds every sample to the nearest multiple of 1/255.
    pub fn quantize_8bit(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|&v| (v * 255.0).round() / 255.0)
            .collect();
        Image::from_clamped(self.width, self.height, data)
    }

    /// Interleaved 8-bit RGB samples.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let plane = self.pixels();
        let mut out = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            for c in 0..3 {
                out.push((self.data[c * plane + i] * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Image> {
        if rgb.len() != 3 * width * height {
            return Err(Error::InvalidImage("rgb buffer length mismatch".into()));
        }
        let plane = width * height;
        let mut data = vec![0.0f32; 3 * plane];
        for i in 0..plane {
            for c in 0..3 {
                data[c * plane + i] = rgb[3 * i + c] as f32 / 255.0;
            }
        }
        Image::new(width, height, data)
    }

    /// Writes the image as an 8-bit RGB PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_png(
            path.as_ref(),
            self.width,
            self.height,
            png::ColorType::Rgb,
            &self.to_rgb8(),
        )
    }
}

pub(crate) fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    bytes: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e.to_string()));
    let mut writer = enc.write_header().map_err(to_err)?;
    writer.write_image_data(bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)?;
    Ok(())
}

fn open_png(path: &Path) -> Result<png::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    decoder.read_info().map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads only the PNG header: `(width, height)`, rejecting >8-bit files.
pub fn probe_png(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let reader = open_png(path)?;
    check_depth(path, &reader)?;
    let info = reader.info();
    Ok((info.width as usize, info.height as usize))
}

fn check_depth(path: &Path, reader: &png::Reader<BufReader<File>>) -> Result<()> {
    let depth = reader.info().bit_depth;
    if depth == png::BitDepth::Sixteen {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            bits: 16,
        });
    }
    Ok(())
}

/// Loads a PNG as an RGB image. 8-bit samples map to `value / 255`;
/// grayscale is replicated to three channels and alpha is discarded.
/// 16-bit files are rejected rather than truncated.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let mut reader = open_png(path)?;
    check_depth(path, &reader)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            bits: frame.bit_depth as u8,
        });
    }
    let (w, h) = (frame.width as usize, frame.height as usize);
    let bytes = &buf[..frame.buffer_size()];
    let stride = frame.line_size;
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::ImageDecode {
                path: path.to_path_buf(),
                reason: "palette was not expanded".into(),
            })
        }
    };
    let mut rgb = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        let row = &bytes[y * stride..y * stride + w * channels];
        for px in row.chunks_exact(channels) {
            if channels < 3 {
                rgb.extend_from_slice(&[px[0]; 3]);
            } else {
                rgb.extend_from_slice(&px[..3]);
            }
        }
    }
    let mut img = Image::from_rgb8(w, h, &rgb)?;
    img.source_path = Some(path.display().to_string());
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_gray(path: &Path, w: u32, h: u32, depth: png::BitDepth, bytes: &[u8]) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut writer = enc.write_header().unwrap();
        writer.write_image_data(bytes).unwrap();
    }

    #[test]
    fn black_png_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        Image::filled(2, 2, 0.0).save_png(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert!(img.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn peak_sample_maps_to_one_and_gray_is_replicated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("white.png");
        write_gray(&p, 1, 1, png::BitDepth::Eight, &[255]);
        let img = load_image(&p).unwrap();
        assert_eq!(img.samples(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        write_gray(&p, 1, 1, png::BitDepth::Sixteen, &[0x12, 0x34]);
        let err = load_image(&p).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDepth { bits: 16, .. }), "{err}");
        assert!(err.to_string().contains("unsupported depth"));
    }

    #[test]
    fn rgb8_round_trip_through_png() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        let rgb: Vec<u8> = (0..5 * 3 * 3).map(|v| (v * 17 % 256) as u8).collect();
        let img = Image::from_rgb8(5, 3, &rgb).unwrap();
        img.save_png(&p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.to_rgb8(), rgb);
        assert_eq!(back.samples(), img.samples());
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(Image::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(Image::new(1, 1, vec![0.0, f32::NAN, 0.0]).is_err());
        assert!(Image::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn edge_padding_replicates_border() {
        let img = Image::from_fn(3, 2, |c, y, x| (c * 6 + y * 3 + x) as f32 / 20.0);
        let padded = img.pad_to_multiple(4);
        assert_eq!(padded.dims(), (4, 4));
        assert_eq!(padded.get(1, 3, 3), img.get(1, 1, 2));
        assert_eq!(padded.crop(0, 0, 3, 2), img);
    }
}
