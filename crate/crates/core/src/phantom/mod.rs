//! Parametric synthetic tooth/bone/CEJ mask triples with analytic RBL truth.
//!
//! A tooth lives in a local frame anchored at its CEJ centre: `u` runs along
//! the tooth axis towards the root, `v` across it to the right. The crown
//! occupies `u` in `[-root_length / 2, 0]`, the root `[0, root_length]`.

mod corpus;
mod field;
mod shapes;

pub use corpus::{
    generate_corpus, read_truth, write_corpus, write_scene, CorpusScene, NoiseLevel, TruthFile,
};
pub use shapes::shape_dataset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{assign_stage, Stage, StageThresholds};
use crate::raster::Mask;
use field::Field1d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomToothSpec {
    pub center_col: f64,
    pub crown_width: f64,
    pub root_length: f64,
    pub cej_row: f64,
    pub bone_offset_left: f64,
    pub bone_offset_right: f64,
    #[serde(default)]
    pub tilt_deg: f64,
    #[serde(default = "one_root")]
    pub roots: u8,
}

fn one_root() -> u8 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation in pixels of the smooth boundary displacement.
    pub jitter_sigma: f64,
    /// Per-pixel flip probability applied to each mask.
    pub speckle_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomScene {
    pub width: usize,
    pub height: usize,
    pub teeth: Vec<PhantomToothSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToothTruth {
    pub id: usize,
    pub rbl_percent: f64,
    pub stage: Stage,
    pub bone_offset_left: f64,
    pub bone_offset_right: f64,
    pub root_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomRender {
    pub tooth: Mask,
    pub bone: Mask,
    pub cej: Mask,
    /// One record per tooth, ids left to right.
    pub truth: Vec<ToothTruth>,
}

/// `max(offset_left, offset_right) * 100 / root_length` and its default stage.
pub fn ground_truth_rbl(spec: &PhantomToothSpec) -> (f64, Stage) {
    let rbl = spec.bone_offset_left.max(spec.bone_offset_right) * 100.0 / spec.root_length;
    let stage = assign_stage(rbl.clamp(0.0, 100.0), &StageThresholds::default())
        .expect("default thresholds are valid");
    (rbl, stage)
}

const CEJ_OVERHANG: f64 = 3.0;
const CREST_OVERHANG: f64 = 3.0;
const FURCATION: f64 = 0.45;
const TOOTH_GAP: f64 = 4.0;

/// A tooth placed on the canvas, with its local frame.
struct Frame<'a> {
    spec: &'a PhantomToothSpec,
    /// Root direction `(row, col)`.
    d: (f64, f64),
    /// Lateral direction, `+v` to the right for an upright tooth.
    e: (f64, f64),
}

impl<'a> Frame<'a> {
    fn new(spec: &'a PhantomToothSpec) -> Self {
        let (s, c) = spec.tilt_deg.to_radians().sin_cos();
        Self {
            spec,
            d: (c, -s),
            e: (s, c),
        }
    }

    fn to_image(&self, u: f64, v: f64) -> (f64, f64) {
        (
            self.spec.cej_row + u * self.d.0 + v * self.e.0,
            self.spec.center_col + u * self.d.1 + v * self.e.1,
        )
    }

    fn to_local(&self, row: f64, col: f64) -> (f64, f64) {
        let (dr, dc) = (row - self.spec.cej_row, col - self.spec.center_col);
        (dr * self.d.0 + dc * self.d.1, dr * self.e.0 + dc * self.e.1)
    }

    fn crown_height(&self) -> f64 {
        0.5 * self.spec.root_length
    }

    /// Outer half-width of the tooth at depth `u`, `None` outside its extent.
    fn half_width(&self, u: f64) -> Option<f64> {
        let (w, l, h) = (self.spec.crown_width, self.spec.root_length, self.crown_height());
        let hw = w / 2.0;
        if u < -h || u > l {
            None
        } else if u < -0.6 * h {
            let t = (u + h) / (0.4 * h);
            Some(0.38 * w + t * (hw - 0.38 * w))
        } else if u <= 0.0 {
            Some(hw)
        } else {
            let q = (u / l).powi(2);
            Some(if self.spec.roots == 2 {
                hw * (1.0 - 0.3 * q)
            } else {
                hw * (1.0 - 0.5 * q)
            })
        }
    }

    /// Half-width of the gap between two roots at depth `u`.
    fn notch(&self, u: f64) -> f64 {
        let (w, l) = (self.spec.crown_width, self.spec.root_length);
        let uf = FURCATION * l;
        if self.spec.roots != 2 || u <= uf {
            0.0
        } else {
            0.1 * w * (u - uf) / (l - uf)
        }
    }

    fn contains(&self, row: f64, col: f64, jitter: Option<(&Field1d, &Field1d)>) -> bool {
        let (u, v) = self.to_local(row, col);
        let Some(hw) = self.half_width(u) else {
            return false;
        };
        let (jl, jr) = jitter.map_or((0.0, 0.0), |(l, r)| (l.at(u), r.at(u)));
        let notch = self.notch(u);
        v >= -hw - jl && v <= hw + jr && v.abs() >= notch
    }

    /// Crest knots for this tooth: the two flank contact points, each with a
    /// short level shoulder outside the tooth.
    fn crest_knots(&self) -> [(f64, f64); 4] {
        let s = self.spec;
        let hl = self.half_width(s.bone_offset_left).unwrap_or(0.0);
        let hr = self.half_width(s.bone_offset_right).unwrap_or(0.0);
        let pl = self.to_image(s.bone_offset_left, -hl);
        let pr = self.to_image(s.bone_offset_right, hr);
        [
            (pl.0, pl.1 - CREST_OVERHANG),
            pl,
            pr,
            (pr.0, pr.1 + CREST_OVERHANG),
        ]
    }

    /// Image-space outline samples used for the canvas and overlap checks.
    fn outline(&self) -> Vec<(f64, f64)> {
        let (h, l) = (self.crown_height(), self.spec.root_length);
        let mut pts = Vec::new();
        for i in 0..=40 {
            let u = (-h + (h + l) * i as f64 / 40.0).min(l);
            let hw = self.half_width(u).expect("inside extent");
            pts.push(self.to_image(u, -hw));
            pts.push(self.to_image(u, hw));
        }
        let ext = self.spec.crown_width / 2.0 + CEJ_OVERHANG;
        pts.push(self.to_image(0.0, -ext));
        pts.push(self.to_image(0.0, ext));
        pts
    }
}

fn validate_tooth(i: usize, t: &PhantomToothSpec) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidScene(format!("tooth {i}: {msg}")));
    let finite = [
        t.center_col,
        t.crown_width,
        t.root_length,
        t.cej_row,
        t.bone_offset_left,
        t.bone_offset_right,
        t.tilt_deg,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return bad("non-finite parameter".into());
    }
    if t.crown_width < 8.0 {
        return bad(format!("crown width {} below 8", t.crown_width));
    }
    if t.bone_offset_left < 0.0 || t.bone_offset_right < 0.0 {
        return bad("negative bone offset".into());
    }
    if t.bone_offset_left >= t.root_length || t.bone_offset_right >= t.root_length {
        return bad("bone offset must be shorter than the root".into());
    }
    if t.tilt_deg.abs() > 20.0 {
        return bad(format!("tilt {} exceeds 20 degrees", t.tilt_deg));
    }
    if t.roots != 1 && t.roots != 2 {
        return bad(format!("{} roots; only 1 or 2 are modelled", t.roots));
    }
    Ok(())
}

/// Checks parameter ranges, canvas containment and horizontal separation.
/// Returns the teeth sorted left to right.
pub fn validate_scene(scene: &PhantomScene) -> Result<Vec<&PhantomToothSpec>> {
    if scene.width < 8 || scene.height < 8 {
        return Err(Error::InvalidScene("canvas smaller than 8x8".into()));
    }
    if !(0.0..=1.0).contains(&scene.noise.speckle_rate) || !(scene.noise.jitter_sigma >= 0.0) {
        return Err(Error::InvalidScene("noise parameters out of range".into()));
    }
    for (i, t) in scene.teeth.iter().enumerate() {
        validate_tooth(i, t)?;
    }
    let mut teeth: Vec<&PhantomToothSpec> = scene.teeth.iter().collect();
    teeth.sort_by(|a, b| a.center_col.total_cmp(&b.center_col));

    let (w, h) = (scene.width as f64, scene.height as f64);
    let inside = |(r, c): (f64, f64)| r >= 1.0 && c >= 1.0 && r <= h - 2.0 && c <= w - 2.0;
    let mut prev_right = f64::NEG_INFINITY;
    let mut prev_knot = f64::NEG_INFINITY;
    for (i, t) in teeth.iter().enumerate() {
        let f = Frame::new(t);
        let outline = f.outline();
        if !outline.iter().all(|&p| inside(p)) {
            return Err(Error::InvalidScene(format!(
                "tooth at column {} leaves the canvas",
                t.center_col
            )));
        }
        let left = outline.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let right = outline.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if left < prev_right + TOOTH_GAP {
            return Err(Error::InvalidScene(format!(
                "teeth {} and {} overlap horizontally",
                i,
                i + 1
            )));
        }
        prev_right = right;
        for k in f.crest_knots() {
            if !inside(k) {
                return Err(Error::InvalidScene("bone crest leaves the canvas".into()));
            }
            if k.1 <= prev_knot {
                return Err(Error::InvalidScene(
                    "bone crest folds back on itself; reduce tilt or bone offset asymmetry".into(),
                ));
            }
            prev_knot = k.1;
        }
    }
    Ok(teeth)
}

/// Piecewise-linear crest row as a function of column, constant beyond the
/// outermost knots.
fn crest_row(knots: &[(f64, f64)], col: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if col <= first.1 {
        return first.0;
    }
    if col >= last.1 {
        return last.0;
    }
    let i = knots.partition_point(|k| k.1 <= col);
    let (a, b) = (knots[i - 1], knots[i]);
    a.0 + (b.0 - a.0) * (col - a.1) / (b.1 - a.1)
}

/// Rasterizes the scene. Truth is computed from the parameters alone; noise
/// only affects the masks.
pub fn render(scene: &PhantomScene) -> Result<PhantomRender> {
    let teeth = validate_scene(scene)?;
    let (w, h) = (scene.width, scene.height);
    let frames: Vec<Frame> = teeth.iter().map(|t| Frame::new(t)).collect();
    let truth = teeth
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (rbl_percent, stage) = ground_truth_rbl(t);
            ToothTruth {
                id: i + 1,
                rbl_percent,
                stage,
                bone_offset_left: t.bone_offset_left,
                bone_offset_right: t.bone_offset_right,
                root_length: t.root_length,
            }
        })
        .collect();

    let mut rng = field::rng(scene.seed);
    let sigma = scene.noise.jitter_sigma;
    let jitter: Vec<(Field1d, Field1d)> = frames
        .iter()
        .map(|f| {
            let (lo, hi) = (-f.crown_height() - 8.0, f.spec.root_length + 8.0);
            (
                Field1d::random(&mut rng, lo, hi, sigma),
                Field1d::random(&mut rng, lo, hi, sigma),
            )
        })
        .collect();
    let crest_jitter = Field1d::random(&mut rng, -8.0, w as f64 + 8.0, sigma);
    let cej_jitter = Field1d::random(&mut rng, -8.0, w as f64 + 8.0, sigma);

    let mut tooth = Mask::new(w, h);
    for (f, (jl, jr)) in frames.iter().zip(&jitter) {
        let b = f.outline();
        let r0 = b.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let r1 = b.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil() as usize;
        let c0 = b.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let c1 = b.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() as usize;
        let pad = (3.0 * sigma).ceil() as usize + 1;
        for r in r0.saturating_sub(pad)..(r1 + pad + 1).min(h) {
            for c in c0.saturating_sub(pad)..(c1 + pad + 1).min(w) {
                if f.contains(r as f64, c as f64, Some((jl, jr))) {
                    tooth.set(r, c, true);
                }
            }
        }
    }

    let knots: Vec<(f64, f64)> = frames.iter().flat_map(|f| f.crest_knots()).collect();
    let mut bone = Mask::new(w, h);
    if !knots.is_empty() {
        for c in 0..w {
            let crest = crest_row(&knots, c as f64) + crest_jitter.at(c as f64);
            for r in 0..h {
                if r as f64 >= crest {
                    bone.set(r, c, true);
                }
            }
        }
    }

    let mut cej = Mask::new(w, h);
    for f in &frames {
        let ext = f.spec.crown_width / 2.0 + CEJ_OVERHANG;
        let a = f.to_image(0.0, -ext);
        let b = f.to_image(0.0, ext);
        let slope = (b.0 - a.0) / (b.1 - a.1);
        for c in a.1.ceil() as usize..=b.1.floor() as usize {
            let row = a.0 + slope * (c as f64 - a.1) + cej_jitter.at(c as f64);
            let r = row.round();
            if r >= 0.0 && (r as usize) < h {
                cej.set(r as usize, c, true);
            }
        }
    }

    let p = scene.noise.speckle_rate;
    if p > 0.0 {
        for m in [&mut tooth, &mut bone, &mut cej] {
            field::speckle(&mut rng, m, p);
        }
    }
    Ok(PhantomRender {
        tooth,
        bone,
        cej,
        truth,
    })
}

impl PhantomToothSpec {
    /// Upright single-root tooth.
    pub fn upright(center_col: f64, cej_row: f64, crown_width: f64, root_length: f64) -> Self {
        Self {
            center_col,
            crown_width,
            root_length,
            cej_row,
            bone_offset_left: 0.0,
            bone_offset_right: 0.0,
            tilt_deg: 0.0,
            roots: 1,
        }
    }

    pub fn with_bone(mut self, left: f64, right: f64) -> Self {
        self.bone_offset_left = left;
        self.bone_offset_right = right;
        self
    }

    pub fn with_tilt(mut self, deg: f64) -> Self {
        self.tilt_deg = deg;
        self
    }

    pub fn with_roots(mut self, roots: u8) -> Self {
        self.roots = roots;
        self
    }

    /// Position of the root tip centre in image coordinates.
    pub fn apex(&self) -> (f64, f64) {
        Frame::new(self).to_image(self.root_length, 0.0)
    }

    /// Unit root direction `(row, col)` in the image.
    pub fn root_direction(&self) -> (f64, f64) {
        Frame::new(self).d
    }
}

impl PhantomScene {
    pub fn new(width: usize, height: usize, teeth: Vec<PhantomToothSpec>) -> Self {
        Self {
            width,
            height,
            teeth,
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }

    /// Same scene with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut s = self.clone();
        s.width = (self.width as f64 * k).round() as usize;
        s.height = (self.height as f64 * k).round() as usize;
        for t in &mut s.teeth {
            t.center_col *= k;
            t.cej_row *= k;
            t.crown_width *= k;
            t.root_length *= k;
            t.bone_offset_left *= k;
            t.bone_offset_right *= k;
        }
        s
    }
}
