use std::sync::OnceLock;

use super::{GrayImage, Mask};
use crate::error::{Error, Result};

/// Overlay label values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Label {
    Background = 0,
    Bone = 1,
    Tooth = 2,
    Cej = 3,
}

impl Label {
    /// Palette colour used when the overlay is written as an indexed PNG.
    pub const fn rgb(self) -> [u8; 3] {
        match self {
            Label::Background => [0, 0, 0],
            Label::Bone => [255, 0, 0],
            Label::Tooth => [0, 255, 0],
            Label::Cej => [255, 255, 0],
        }
    }

    pub const ALL: [Label; 4] = [Label::Background, Label::Bone, Label::Tooth, Label::Cej];
}

/// Per-pixel label raster with values in `0..=3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl LabelImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Mask of pixels carrying exactly `label`.
    pub fn mask_of(&self, label: Label) -> Mask {
        Mask::from_bits(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == label as u8).collect(),
        )
        .expect("dimensions match by construction")
    }
}

/// 8-bit RGB raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Composes the three masks with priority CEJ > tooth > bone > background.
pub fn overlay(tooth: &Mask, bone: &Mask, cej: &Mask) -> Result<LabelImage> {
    if !tooth.same_dims(bone) || !tooth.same_dims(cej) {
        return Err(Error::input("overlay masks must share dimensions"));
    }
    let labels = tooth
        .bits()
        .iter()
        .zip(bone.bits())
        .zip(cej.bits())
        .map(|((&t, &b), &c)| {
            if c {
                Label::Cej as u8
            } else if t {
                Label::Tooth as u8
            } else if b {
                Label::Bone as u8
            } else {
                Label::Background as u8
            }
        })
        .collect();
    Ok(LabelImage {
        width: tooth.width(),
        height: tooth.height(),
        labels,
    })
}

const HEATMAP_DATA: &str = include_str!("../../data/heatmap_256.txt");

/// The shipped 256-entry colormap, index 0 deep blue through index 255 deep red.
pub fn heatmap_table() -> &'static [[u8; 3]; 256] {
    static TABLE: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[0u8; 3]; 256];
        let rows = HEATMAP_DATA
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut n = 0;
        for (entry, line) in table.iter_mut().zip(rows) {
            let vals: Vec<u8> = line
                .split_whitespace()
                .map(|v| v.parse().expect("colormap entries are bytes"))
                .collect();
            *entry = [vals[0], vals[1], vals[2]];
            n += 1;
        }
        assert_eq!(n, 256, "colormap must have 256 entries");
        table
    })
}

/// Maps intensities to colours through [`heatmap_table`].
pub fn apply_heatmap(g: &GrayImage) -> RgbImage {
    let table = heatmap_table();
    let mut data = Vec::with_capacity(g.data().len() * 3);
    for &v in g.data() {
        let idx = (v.clamp(0.0, 1.0) * 255.0).round() as usize;
        data.extend_from_slice(&table[idx]);
    }
    RgbImage {
        width: g.width(),
        height: g.height(),
        data,
    }
}
