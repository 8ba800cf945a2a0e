use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// Bilinear resize with pixel-centre alignment and edge clamping.
pub fn resize(g: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!(
            "resize target must be at least 1x1, got {width}x{height}"
        )));
    }
    if g.width() == 0 || g.height() == 0 {
        return Err(Error::input("cannot resize an empty image"));
    }
    if width == g.width() && height == g.height() {
        return Ok(g.clone());
    }
    let sx = g.width() as f64 / width as f64;
    let sy = g.height() as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height);
    for r in 0..height {
        let y = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (g.height() - 1) as f64);
        for c in 0..width {
            let x = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (g.width() - 1) as f64);
            out.push(sample_bilinear(g, y, x));
        }
    }
    Ok(GrayImage::from_vec_unchecked(width, height, out))
}

/// Bilinear sample at a real position already known to be inside the image.
fn sample_bilinear(g: &GrayImage, y: f64, x: f64) -> f64 {
    let (r0, c0) = (y.floor() as usize, x.floor() as usize);
    let r1 = (r0 + 1).min(g.height() - 1);
    let c1 = (c0 + 1).min(g.width() - 1);
    let (fy, fx) = (y - r0 as f64, x - c0 as f64);
    let top = g.get(r0, c0) * (1.0 - fx) + g.get(r0, c1) * fx;
    let bot = g.get(r1, c0) * (1.0 - fx) + g.get(r1, c1) * fx;
    (top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0)
}

/// One augmentation step. The `Random*` variants draw their parameter from
/// the generator seeded in [`augment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    Crop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    HFlip,
    VFlip,
    Rotate {
        degrees: f64,
    },
    IntensityScale {
        alpha: f64,
    },
    RandomCrop {
        height: usize,
        width: usize,
    },
    RandomRotate {
        max_degrees: f64,
    },
    RandomIntensity {
        min_alpha: f64,
        max_alpha: f64,
    },
    RandomHFlip,
}

/// Applies `ops` in order. Deterministic for a given `seed`.
pub fn augment(g: &GrayImage, ops: &[AugmentOp], seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = g.clone();
    for op in ops {
        img = match *op {
            AugmentOp::Crop {
                top,
                left,
                height,
                width,
            } => crop(&img, top, left, height, width)?,
            AugmentOp::HFlip => hflip(&img),
            AugmentOp::VFlip => vflip(&img),
            AugmentOp::Rotate { degrees } => rotate(&img, degrees),
            AugmentOp::IntensityScale { alpha } => scale(&img, alpha)?,
            AugmentOp::RandomCrop { height, width } => {
                if height == 0 || width == 0 || height > img.height() || width > img.width() {
                    return Err(Error::param(format!(
                        "random crop {height}x{width} does not fit {}x{}",
                        img.height(),
                        img.width()
                    )));
                }
                let top = rng.random_range(0..=img.height() - height);
                let left = rng.random_range(0..=img.width() - width);
                crop(&img, top, left, height, width)?
            }
            AugmentOp::RandomRotate { max_degrees } => {
                let d = if max_degrees > 0.0 {
                    rng.random_range(-max_degrees..=max_degrees)
                } else {
                    0.0
                };
                rotate(&img, d)
            }
            AugmentOp::RandomIntensity {
                min_alpha,
                max_alpha,
            } => {
                if !(min_alpha >= 0.0 && min_alpha <= max_alpha) {
                    return Err(Error::param(format!(
                        "intensity range [{min_alpha}, {max_alpha}] is invalid"
                    )));
                }
                scale(&img, rng.random_range(min_alpha..=max_alpha))?
            }
            AugmentOp::RandomHFlip => {
                if rng.random_bool(0.5) {
                    hflip(&img)
                } else {
                    img
                }
            }
        };
    }
    Ok(img)
}

fn crop(g: &GrayImage, top: usize, left: usize, height: usize, width: usize) -> Result<GrayImage> {
    if height == 0 || width == 0 || top + height > g.height() || left + width > g.width() {
        return Err(Error::param(format!(
            "crop window {height}x{width} at ({top}, {left}) lies outside the {}x{} image",
            g.height(),
            g.width()
        )));
    }
    let mut out = Vec::with_capacity(width * height);
    for r in top..top + height {
        out.extend_from_slice(&g.data()[r * g.width() + left..r * g.width() + left + width]);
    }
    Ok(GrayImage::from_vec_unchecked(width, height, out))
}

fn hflip(g: &GrayImage) -> GrayImage {
    let mut out = Vec::with_capacity(g.data().len());
    for row in g.data().chunks(g.width().max(1)) {
        out.extend(row.iter().rev());
    }
    GrayImage::from_vec_unchecked(g.width(), g.height(), out)
}

fn vflip(g: &GrayImage) -> GrayImage {
    let mut out = Vec::with_capacity(g.data().len());
    for row in g.data().chunks(g.width().max(1)).rev() {
        out.extend_from_slice(row);
    }
    GrayImage::from_vec_unchecked(g.width(), g.height(), out)
}

/// Rotation about the image centre; samples falling outside are 0.
fn rotate(g: &GrayImage, degrees: f64) -> GrayImage {
    if degrees == 0.0 {
        return g.clone();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (g.height() as f64 - 1.0) / 2.0;
    let cx = (g.width() as f64 - 1.0) / 2.0;
    let mut out = GrayImage::new(g.width(), g.height());
    for r in 0..g.height() {
        for c in 0..g.width() {
            let (dy, dx) = (r as f64 - cy, c as f64 - cx);
            // inverse map: rotate the output position back by -degrees
            let y = cos * dy - sin * dx + cy;
            let x = sin * dy + cos * dx + cx;
            if y < -0.5 || x < -0.5 || y > g.height() as f64 - 0.5 || x > g.width() as f64 - 0.5 {
                continue;
            }
            let y = y.clamp(0.0, (g.height() - 1) as f64);
            let x = x.clamp(0.0, (g.width() - 1) as f64);
            out.set(r, c, sample_bilinear(g, y, x));
        }
    }
    out
}

fn scale(g: &GrayImage, alpha: f64) -> Result<GrayImage> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param(format!("intensity scale {alpha} must be finite and >= 0")));
    }
    Ok(GrayImage::from_vec_unchecked(
        g.width(),
        g.height(),
        g.data().iter().map(|v| (v * alpha).clamp(0.0, 1.0)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        let n = (w * h) as f64;
        GrayImage::from_vec(w, h, (0..w * h).map(|i| i as f64 / n).collect()).unwrap()
    }

    #[test]
    fn resize_identity() {
        let g = ramp(7, 5);
        assert_eq!(resize(&g, 7, 5).unwrap(), g);
    }

    #[test]
    fn resize_two_by_two_to_two_by_one() {
        // rows [0, 0] and [1, 1]; output row centre maps to source y = 0.5
        let g = GrayImage::from_vec(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let r = resize(&g, 2, 1).unwrap();
        assert_eq!(r.data(), &[0.5, 0.5]);
    }

    #[test]
    fn resize_constant() {
        let g = GrayImage::filled(9, 4, 0.3);
        let r = resize(&g, 31, 17).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn resize_zero_target() {
        let g = GrayImage::filled(3, 3, 0.3);
        assert!(matches!(resize(&g, 0, 2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rotate_zero_is_identity() {
        let g = ramp(6, 9);
        assert_eq!(augment(&g, &[AugmentOp::Rotate { degrees: 0.0 }], 1).unwrap(), g);
    }

    #[test]
    fn rotate_quarter_turn_matches_transpose() {
        let g = ramp(5, 5);
        let r = augment(&g, &[AugmentOp::Rotate { degrees: 90.0 }], 0).unwrap();
        for row in 0..5 {
            for col in 0..5 {
                assert!((r.get(row, col) - g.get(4 - col, row)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn intensity_scale_clamps() {
        let g = GrayImage::filled(2, 2, 0.6);
        let r = augment(&g, &[AugmentOp::IntensityScale { alpha: 2.0 }], 0).unwrap();
        assert!(r.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn crop_outside_rejected() {
        let g = ramp(4, 4);
        let op = AugmentOp::Crop {
            top: 2,
            left: 0,
            height: 3,
            width: 2,
        };
        assert!(matches!(augment(&g, &[op], 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn crop_extracts_window() {
        let g = ramp(4, 3);
        let op = AugmentOp::Crop {
            top: 1,
            left: 1,
            height: 2,
            width: 2,
        };
        let c = augment(&g, &[op], 0).unwrap();
        assert_eq!(c.data(), &[g.get(1, 1), g.get(1, 2), g.get(2, 1), g.get(2, 2)]);
    }

    #[test]
    fn random_ops_seeded() {
        let g = ramp(20, 16);
        let ops = [
            AugmentOp::RandomCrop {
                height: 10,
                width: 10,
            },
            AugmentOp::RandomRotate { max_degrees: 15.0 },
            AugmentOp::RandomIntensity {
                min_alpha: 0.8,
                max_alpha: 1.2,
            },
        ];
        assert_eq!(augment(&g, &ops, 42).unwrap(), augment(&g, &ops, 42).unwrap());
        assert_ne!(augment(&g, &ops, 42).unwrap(), augment(&g, &ops, 43).unwrap());
    }

    proptest! {
        #[test]
        fn double_flip_is_identity(
            w in 1usize..12,
            h in 1usize..12,
            seed in any::<u64>(),
        ) {
            let data: Vec<f64> = (0..w * h).map(|i| ((i as u64 ^ seed) % 97) as f64 / 96.0).collect();
            let g = GrayImage::from_vec(w, h, data).unwrap();
            prop_assert_eq!(&augment(&g, &[AugmentOp::HFlip, AugmentOp::HFlip], seed).unwrap(), &g);
            prop_assert_eq!(&augment(&g, &[AugmentOp::VFlip, AugmentOp::VFlip], seed).unwrap(), &g);
        }
    }
}
