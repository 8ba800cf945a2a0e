use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::field;
use crate::raster::{GrayImage, Mask};

/// Noisy grayscale images of random ellipses and rectangles with their
/// exact masks, for segmentation training.
pub fn shape_dataset(n: usize, size: usize, seed: u64) -> Vec<(GrayImage, Mask)> {
    let mut rng = field::rng(seed);
    let noise = Normal::new(0.0, 0.08).expect("positive sigma");
    let s = size as f64;
    (0..n)
        .map(|_| {
            let cr = rng.random_range(0.3 * s..0.7 * s);
            let cc = rng.random_range(0.3 * s..0.7 * s);
            let a = rng.random_range(0.12 * s..0.28 * s);
            let b = rng.random_range(0.12 * s..0.28 * s);
            let ellipse = rng.random_bool(0.5);
            let mask = Mask::from_fn(size, size, |r, c| {
                let (dr, dc) = ((r as f64 - cr) / a, (c as f64 - cc) / b);
                if ellipse {
                    dr * dr + dc * dc <= 1.0
                } else {
                    dr.abs() <= 1.0 && dc.abs() <= 1.0
                }
            });
            let data = mask
                .bits()
                .iter()
                .map(|&on| {
                    let base: f64 = if on { 0.7 } else { 0.25 };
                    (base + noise.sample(&mut rng)).clamp(0.0, 1.0)
                })
                .collect();
            let img = GrayImage::from_vec(size, size, data).expect("clamped values");
            (img, mask)
        })
        .collect()
}
