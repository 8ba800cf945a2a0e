use super::{GrayImage, Mask};
use crate::error::{Error, Result};

/// Default smoothing width in pixels.
pub const DEFAULT_SIGMA: f64 = 1.0;
/// Default binarization threshold after smoothing.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Normalized 1-D Gaussian kernel truncated at radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Half-sample symmetric reflection (`dcba|abcd|dcba`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Separable Gaussian blur with reflect padding; output has the input's size.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let src = img.data();

    let mut tmp = vec![0.0; w * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * line[reflect(col as isize + t as isize - r, w)];
            }
            tmp[row * w + col] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for (t, &kv) in k.iter().enumerate() {
            let sr = reflect(row as isize + t as isize - r, h);
            let src_row = &tmp[sr * w..(sr + 1) * w];
            let dst = &mut out[row * w..(row + 1) * w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    // rounding can push saturated regions a hair above 1
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(GrayImage::from_vec_unchecked(w, h, out))
}

/// Sets a bit wherever the intensity is strictly above `threshold`.
pub fn binarize(img: &GrayImage, threshold: f64) -> Mask {
    Mask::from_bits(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > threshold).collect(),
    )
    .expect("dimensions match by construction")
}

impl Mask {
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(17, 9, 0.37);
        for sigma in [0.5, 1.0, 2.5] {
            let out = gaussian_smooth(&img, sigma).unwrap();
            for v in out.data() {
                assert!((v - 0.37).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_peak_equals_kernel_peak() {
        let mut img = GrayImage::new(21, 21);
        img.set(10, 10, 1.0);
        let out = gaussian_smooth(&img, 1.0).unwrap();
        // direct evaluation of the truncated, normalized kernel at radius 3
        let raw: Vec<f64> = (-3..=3).map(|x: i32| (-(x * x) as f64 / 2.0).exp()).collect();
        let norm: f64 = raw.iter().sum();
        let peak_1d = 1.0 / norm;
        assert!((out.get(10, 10) - peak_1d * peak_1d).abs() < 1e-15);
        assert!((out.get(10, 10) - 0.159_241_125_690_702_3).abs() < 1e-12);
    }

    #[test]
    fn interior_impulse_preserves_mass() {
        let mut img = GrayImage::new(31, 25);
        img.set(12, 15, 1.0);
        img.set(13, 14, 0.5);
        let before = img.sum();
        let after = gaussian_smooth(&img, 1.7).unwrap().sum();
        assert!(((after - before) / before).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let img = GrayImage::new(4, 4);
        assert!(matches!(
            gaussian_smooth(&img, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(gaussian_smooth(&img, -1.0).is_err());
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn binarize_examples() {
        let low = GrayImage::filled(5, 5, 0.4);
        assert!(binarize(&low, 0.5).is_empty());
        let high = GrayImage::filled(5, 5, 0.6);
        assert_eq!(binarize(&high, 0.5).count(), 25);

        let checker = GrayImage::from_vec(
            4,
            2,
            (0..8)
                .map(|i| if (i / 4 + i % 4) % 2 == 0 { 0.3 } else { 0.7 })
                .collect(),
        )
        .unwrap();
        let m = binarize(&checker, 0.5);
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(m.get(r, c), (r + c) % 2 == 1);
            }
        }
    }
}
