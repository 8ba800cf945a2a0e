use super::{
    connected_components, trace_cej_polyline, trace_contour, BoundingBox, GrayImage, Mask, Pixel,
    Polyline,
};
use crate::error::{Error, Result};

/// Fraction of the tooth box added on every side when clipping bone and CEJ
/// context for an instance.
pub const CLIP_MARGIN: f64 = 0.10;

/// Minimum tooth component area: 0.1% of the image, at least one pixel.
pub fn default_min_area(width: usize, height: usize) -> usize {
    ((width * height) as f64 * 0.001).round().max(1.0) as usize
}

/// One extracted tooth with its clipped bone and CEJ context.
///
/// Point collections are kept in full-image coordinates. `tooth_mask` is the
/// crop of this component alone over `bbox`; `bone_mask` is the bone crop over
/// the expanded `clip` box.
#[derive(Debug, Clone, PartialEq)]
pub struct ToothInstance {
    pub id: usize,
    pub bbox: BoundingBox,
    pub clip: BoundingBox,
    pub tooth_mask: Mask,
    pub bone_mask: Mask,
    pub bone_contour: Vec<Pixel>,
    pub cej: Polyline,
    pub truncated: bool,
    pub image_width: usize,
    pub image_height: usize,
}

impl ToothInstance {
    /// Tooth pixels in image coordinates.
    pub fn tooth_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.tooth_mask
            .pixels()
            .map(|p| Pixel::new(p.row + self.bbox.top, p.col + self.bbox.left))
    }

    pub fn is_tooth(&self, row: isize, col: isize) -> bool {
        self.tooth_mask.get_signed(
            row - self.bbox.top as isize,
            col - self.bbox.left as isize,
        )
    }

    /// Membership in the tooth mask dilated by one pixel (8-neighbourhood).
    pub fn is_tooth_dilated(&self, row: isize, col: isize) -> bool {
        (-1..=1).any(|dr| (-1..=1).any(|dc| self.is_tooth(row + dr, col + dc)))
    }

    /// Centroid of bone pixels inside the clip box, image coordinates.
    pub fn bone_centroid(&self) -> Option<(f64, f64)> {
        let (mut n, mut sr, mut sc) = (0usize, 0.0, 0.0);
        for p in self.bone_mask.pixels() {
            n += 1;
            sr += (p.row + self.clip.top) as f64;
            sc += (p.col + self.clip.left) as f64;
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }

    /// Grayscale rendering of the clip region used as classifier input:
    /// tooth 0.45, bone 0.35 and CEJ 0.2, summed where they overlap.
    pub fn render_crop(&self) -> GrayImage {
        let (w, h) = (self.clip.width(), self.clip.height());
        let mut img = GrayImage::new(w, h);
        for r in 0..h {
            for c in 0..w {
                let (gr, gc) = ((r + self.clip.top) as isize, (c + self.clip.left) as isize);
                let mut v = 0.0;
                if self.is_tooth(gr, gc) {
                    v += 0.45;
                }
                if self.bone_mask.get(r, c) {
                    v += 0.35;
                }
                img.set(r, c, v);
            }
        }
        for p in self.cej.points.iter().filter(|p| p.observed) {
            let row = p.row.round() as usize;
            if self.clip.contains(row, p.col) {
                let (r, c) = (row - self.clip.top, p.col - self.clip.left);
                let v = img.get(r, c);
                img.set(r, c, v + 0.2);
            }
        }
        img
    }
}

/// Splits a tooth mask into per-tooth instances ordered left to right.
///
/// The bone contour (union over bone components) and the CEJ polyline are
/// computed once on the full masks and clipped to each tooth box expanded by
/// [`CLIP_MARGIN`]. Teeth touching the image border are flagged `truncated`.
pub fn extract_tooth_instances(
    tooth: &Mask,
    bone: &Mask,
    cej: &Mask,
    min_area: usize,
) -> Result<Vec<ToothInstance>> {
    if !tooth.same_dims(bone) || !tooth.same_dims(cej) {
        return Err(Error::input(format!(
            "mask dimensions differ: tooth {}x{}, bone {}x{}, cej {}x{}",
            tooth.width(),
            tooth.height(),
            bone.width(),
            bone.height(),
            cej.width(),
            cej.height()
        )));
    }
    let (w, h) = (tooth.width(), tooth.height());
    let teeth = connected_components(tooth, min_area);
    if teeth.is_empty() {
        return Ok(Vec::new());
    }

    let mut bone_contour = Vec::new();
    for comp in connected_components(bone, min_area) {
        bone_contour.extend(trace_contour(&comp.mask)?.points);
    }
    let cej_line = match trace_cej_polyline(cej) {
        Ok(p) => p,
        Err(Error::NoLine) => Polyline::default(),
        Err(e) => return Err(e),
    };

    Ok(teeth
        .into_iter()
        .enumerate()
        .map(|(i, comp)| {
            let clip = comp.bbox.expand(CLIP_MARGIN, w, h);
            ToothInstance {
                id: i + 1,
                bbox: comp.bbox,
                clip,
                tooth_mask: comp.mask.crop(&comp.bbox),
                bone_mask: bone.crop(&clip),
                bone_contour: bone_contour
                    .iter()
                    .filter(|p| clip.contains(p.row, p.col))
                    .copied()
                    .collect(),
                cej: cej_line.clip_cols(clip.left, clip.right),
                truncated: comp.bbox.touches_border(w, h),
                image_width: w,
                image_height: h,
            }
        })
        .collect())
}
