//! Raster primitives for segmentation masks and grayscale images.
//!
//! All rasters are row-major with `(row, col)` indexing, row 0 at the top.

mod cej;
mod components;
mod contour;
mod filter;
mod instance;
pub mod io;
mod overlay;
mod transform;

pub use cej::{trace_cej_polyline, Polyline, PolylinePoint};
pub use components::{connected_components, Component};
pub use contour::{trace_contour, Contour};
pub use filter::{binarize, gaussian_smooth, DEFAULT_SIGMA, DEFAULT_THRESHOLD};
pub use instance::{default_min_area, extract_tooth_instances, ToothInstance, CLIP_MARGIN};
pub use overlay::{apply_heatmap, heatmap_table, overlay, Label, LabelImage, RgbImage};
pub use transform::{augment, resize, AugmentOp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row <= self.bottom && col >= self.left && col <= self.right
    }

    /// Grows the box by `frac` of its width/height on each side, clamped to an
    /// image of the given size.
    pub fn expand(&self, frac: f64, width: usize, height: usize) -> BoundingBox {
        let dx = (self.width() as f64 * frac).ceil() as usize;
        let dy = (self.height() as f64 * frac).ceil() as usize;
        BoundingBox {
            top: self.top.saturating_sub(dy),
            left: self.left.saturating_sub(dx),
            bottom: (self.bottom + dy).min(height - 1),
            right: (self.right + dx).min(width - 1),
        }
    }

    pub fn touches_border(&self, width: usize, height: usize) -> bool {
        self.top == 0 || self.left == 0 || self.bottom + 1 == height || self.right + 1 == width
    }
}

/// Grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image from row-major data. Values must lie in `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::input(format!(
                "expected {} values for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Sets a pixel, clamping the value into `[0, 1]`.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value.clamp(0.0, 1.0);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl From<&Mask> for GrayImage {
    fn from(m: &Mask) -> Self {
        GrayImage::from_vec_unchecked(
            m.width,
            m.height,
            m.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Binary occupancy raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::input(format!(
                "expected {} bits for a {width}x{height} mask, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Out-of-range coordinates read as background.
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.bits[row as usize * self.width + col as usize]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.bits.iter().enumerate().filter_map(move |(i, &b)| {
            b.then(|| Pixel::new(i / self.width, i % self.width))
        })
    }

    /// Tight bounds of the foreground, `None` for an empty mask.
    pub fn bounds(&self) -> Option<BoundingBox> {
        let mut it = self.pixels();
        let first = it.next()?;
        let mut b = BoundingBox {
            top: first.row,
            left: first.col,
            bottom: first.row,
            right: first.col,
        };
        for p in it {
            b.top = b.top.min(p.row);
            b.bottom = b.bottom.max(p.row);
            b.left = b.left.min(p.col);
            b.right = b.right.max(p.col);
        }
        Some(b)
    }

    pub fn crop(&self, b: &BoundingBox) -> Mask {
        Mask::from_fn(b.width(), b.height(), |r, c| self.get(b.top + r, b.left + c))
    }
}
