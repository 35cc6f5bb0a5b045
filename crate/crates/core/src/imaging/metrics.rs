//! Distortion and rate measures in the 8-bit (255-scaled) domain.

use super::Image;
use crate::error::{Error, Result};

/// PSNR value written to tables and CSV files in place of `+∞`
/// (identical images).
pub const PSNR_SENTINEL_DB: f64 = 999.0;

/// Default PSNR peak for 8-bit content.
pub const PEAK_8BIT: f64 = 255.0;

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean over all `H·W·3` samples of `(255·(a − b))²`.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = 255.0 * (x as f64 - y as f64);
            d * d
        })
        .sum();
    Ok(sum / a.samples().len() as f64)
}

/// `10·log10(peak² / mse)`; returns `f64::INFINITY` for identical images.
pub fn psnr_with_peak(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

/// PSNR with the 8-bit peak of 255.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr_with_peak(a, b, PEAK_8BIT)
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Maps infinite PSNR onto [`PSNR_SENTINEL_DB`] for reporting.
pub fn reportable_db(db: f64) -> f64 {
    if db.is_infinite() && db > 0.0 {
        PSNR_SENTINEL_DB
    } else {
        db
    }
}

/// Bits per pixel: `8·bytes / (width·height)`.
pub fn bpp(byte_count: u64, width: usize, height: usize) -> Result<f64> {
    let area = width * height;
    if area == 0 {
        return Err(Error::ZeroArea);
    }
    Ok(8.0 * byte_count as f64 / area as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_has_zero_mse_and_infinite_psnr() {
        let a = Image::from_fn(4, 3, |c, y, x| ((c + y * x) % 7) as f32 / 7.0);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(reportable_db(psnr(&a, &a).unwrap()), PSNR_SENTINEL_DB);
    }

    #[test]
    fn full_range_difference() {
        let a = Image::filled(8, 8, 0.0);
        let b = Image::filled(8, 8, 1.0);
        assert_eq!(mse(&a, &b).unwrap(), 65025.0);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn one_code_value_offset() {
        let a = Image::from_fn(16, 16, |c, y, x| ((c * 31 + y * 7 + x) % 200) as f32 / 255.0);
        let b = Image::from_fn(16, 16, |c, y, x| ((c * 31 + y * 7 + x) % 200 + 1) as f32 / 255.0);
        assert!((mse(&a, &b).unwrap() - 1.0).abs() < 1e-4);
        // 20·log10(255)
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Image::filled(2, 2, 0.0);
        let b = Image::filled(2, 3, 0.0);
        assert!(matches!(mse(&a, &b), Err(Error::DimensionMismatch(_))));
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn bits_per_pixel() {
        assert_eq!(bpp(1000, 256, 256).unwrap(), 0.1220703125);
        assert_eq!(bpp(0, 17, 3).unwrap(), 0.0);
        assert!(matches!(bpp(10, 0, 5), Err(Error::ZeroArea)));
        let (b, e) = (123u64, 4567u64);
        assert_eq!(
            bpp(b, 128, 128).unwrap() + bpp(e, 128, 128).unwrap(),
            bpp(b + e, 128, 128).unwrap()
        );
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = Image::from_fn(12, 12, |c, y, x| (((c + 1) * (y + 3) * (x + 5)) % 128 + 64) as f32 / 255.0);
        let mut last = f64::INFINITY;
        for amp in [1.0f32, 2.0, 4.0, 8.0] {
            let noisy = Image::from_fn(12, 12, |c, y, x| {
                let sign = if (c + y + x) % 2 == 0 { 1.0 } else { -1.0 };
                base.get(c, y, x) + sign * amp / 255.0
            });
            let p = psnr(&base, &noisy).unwrap();
            assert!(p < last, "amplitude {amp}: {p} !< {last}");
            last = p;
        }
    }

    proptest! {
        #[test]
        fn psnr_is_symmetric_and_mse_nonnegative(
            a in proptest::collection::vec(0u8..=255, 27),
            b in proptest::collection::vec(0u8..=255, 27),
        ) {
            let a = Image::from_rgb8(3, 3, &a).unwrap();
            let b = Image::from_rgb8(3, 3, &b).unwrap();
            let m = mse(&a, &b).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert_eq!(m, mse(&b, &a).unwrap());
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        }

        #[test]
        fn bpp_matches_integer_oracle(bytes in 0u64..10_000_000, w in 1usize..4096, h in 1usize..4096) {
            // exact rational 8·bytes/(w·h) reduced by gcd, compared in f64
            let (mut num, mut den) = (8 * bytes as u128, (w * h) as u128);
            let g = gcd(num, den);
            if g > 0 { num /= g; den /= g; }
            let oracle = num as f64 / den as f64;
            let got = bpp(bytes, w, h).unwrap();
            if oracle == 0.0 {
                prop_assert_eq!(got, 0.0);
            } else {
                prop_assert!(((got - oracle) / oracle).abs() < 1e-12);
            }
        }
    }

    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
}
