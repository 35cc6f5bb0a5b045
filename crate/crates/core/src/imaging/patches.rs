use super::Image;

/// Top-left corners `(x, y)` of all full `patch × patch` windows at the given
/// stride, in row-major scan order.
pub fn patch_origins(width: usize, height: usize, patch: usize, stride: usize) -> Vec<(usize, usize)> {
    if patch == 0 || stride == 0 || width < patch || height < patch {
        return Vec::new();
    }
    let ny = (height - patch) / stride + 1;
    let nx = (width - patch) / stride + 1;
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i * stride, j * stride)))
        .collect()
}

/// All full patches in row-major order; undersized images yield nothing.
pub fn extract_patches(image: &Image, patch: usize, stride: usize) -> Vec<Image> {
    patch_origins(image.width(), image.height(), patch, stride)
        .into_iter()
        .map(|(x, y)| image.crop(x, y, patch, patch))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_counts() {
        let img = Image::filled(256, 256, 0.5);
        assert_eq!(extract_patches(&img, 128, 128).len(), 4);
        assert!(extract_patches(&Image::filled(100, 100, 0.5), 128, 128).is_empty());
        assert!(extract_patches(&img, 0, 1).is_empty());
        assert!(extract_patches(&img, 1, 0).is_empty());
    }

    #[test]
    fn whole_image_patch_is_identity() {
        let img = Image::from_fn(7, 5, |c, y, x| ((c + 2 * y + 3 * x) % 11) as f32 / 11.0);
        let p = extract_patches(&img, 5, 5);
        assert_eq!(p.len(), 1);
        // 7 wide allows only one 5-wide window at stride 5
        assert_eq!(p[0], img.crop(0, 0, 5, 5));
        let sq = img.crop(0, 0, 5, 5);
        assert_eq!(extract_patches(&sq, 5, 5), vec![sq]);
    }

    #[test]
    fn row_major_order() {
        let img = Image::from_fn(4, 4, |_, y, x| (y * 4 + x) as f32 / 16.0);
        let p = extract_patches(&img, 2, 2);
        let firsts: Vec<f32> = p.iter().map(|q| q.get(0, 0, 0)).collect();
        assert_eq!(firsts, vec![0.0, 2.0 / 16.0, 8.0 / 16.0, 10.0 / 16.0]);
    }

    proptest! {
        #[test]
        fn count_formula(w in 1usize..64, h in 1usize..64, patch in 1usize..20, stride in 1usize..20) {
            let n = patch_origins(w, h, patch, stride).len();
            let expected = if w >= patch && h >= patch {
                ((h - patch) / stride + 1) * ((w - patch) / stride + 1)
            } else {
                0
            };
            prop_assert_eq!(n, expected);
        }
    }
}
