use serde::{Deserialize, Serialize};

use super::{Point, Segment};
use crate::error::{Error, Result};
use crate::raster::{trace_contour, Polyline, ToothInstance};

/// Axis of one tooth. `a` is the bone contact midpoint, `b` the tooth contour
/// centroid; the axis passes through `b` along the unit `direction`, which
/// points from crown to root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToothAxis {
    pub a: Point,
    pub b: Point,
    pub direction: Point,
    /// True when `a` and `b` were too close and the principal axis of the
    /// tooth mask was used instead.
    pub fallback: bool,
}

/// Line lengths of the RBL construction plus the points they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RblMeasurement {
    pub line1_left: f64,
    pub line1_right: f64,
    pub line2_left: f64,
    pub line2_right: f64,
    pub rbl_percent: f64,
    pub apex_left: Point,
    pub apex_right: Point,
    /// Where the root-length lines meet the CEJ polyline.
    pub cej_hit_left: Point,
    pub cej_hit_right: Point,
    pub cej_seg: Segment,
    pub bone_seg: Segment,
    pub axis: ToothAxis,
    pub implausible: bool,
}

/// `|a - b|` below this fraction of the longer box side counts as degenerate.
const DEGENERATE_AXIS_FRACTION: f64 = 0.1;

/// Leftmost and rightmost of `points`, rows averaged at each extreme column.
fn extreme_segment(points: &[Point]) -> Option<Segment> {
    let min_c = points.iter().map(|p| p.col).reduce(f64::min)?;
    let max_c = points.iter().map(|p| p.col).reduce(f64::max)?;
    let mean_row = |c: f64| {
        let rows: Vec<f64> = points.iter().filter(|p| p.col == c).map(|p| p.row).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    Some(Segment {
        a: Point::new(mean_row(min_c), min_c),
        b: Point::new(mean_row(max_c), max_c),
    })
}

/// Bone contour pixels touching the tooth (one pixel of dilation).
pub fn tooth_bone_intersection(inst: &ToothInstance) -> Result<Segment> {
    let hits: Vec<Point> = inst
        .bone_contour
        .iter()
        .filter(|p| inst.is_tooth_dilated(p.row as isize, p.col as isize))
        .map(|p| Point::new(p.row as f64, p.col as f64))
        .collect();
    extreme_segment(&hits).ok_or(Error::NoBoneContact)
}

/// Observed CEJ polyline points touching the tooth (one pixel of dilation).
pub fn tooth_cej_intersection(inst: &ToothInstance) -> Result<Segment> {
    let hits: Vec<Point> = inst
        .cej
        .points
        .iter()
        .filter(|p| p.observed && inst.is_tooth_dilated(p.row.round() as isize, p.col as isize))
        .map(|p| Point::new(p.row, p.col as f64))
        .collect();
    extreme_segment(&hits).ok_or(Error::NoCejContact)
}

fn principal_direction(inst: &ToothInstance) -> Point {
    let pts: Vec<(f64, f64)> = inst
        .tooth_pixels()
        .map(|p| (p.row as f64, p.col as f64))
        .collect();
    let n = pts.len() as f64;
    let mr = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mc = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for (r, c) in &pts {
        srr += (r - mr) * (r - mr);
        scc += (c - mc) * (c - mc);
        src += (r - mr) * (c - mc);
    }
    let theta = 0.5 * (2.0 * src).atan2(srr - scc);
    Point::new(theta.cos(), theta.sin())
}

/// Axis through the contour centroid `b` towards the bone contact midpoint
/// `a`, oriented so the CEJ contact lies on the crown side.
pub fn tooth_axis(inst: &ToothInstance, bone_seg: &Segment, cej_seg: &Segment) -> Result<ToothAxis> {
    let contour = trace_contour(&inst.tooth_mask)?;
    let (cr, cc) = contour.centroid();
    let b = Point::new(cr + inst.bbox.top as f64, cc + inst.bbox.left as f64);
    let a = bone_seg.midpoint();

    let extent = inst.bbox.width().max(inst.bbox.height()) as f64;
    let ab = a.sub(b);
    let fallback = ab.norm() < DEGENERATE_AXIS_FRACTION * extent;
    let mut direction = if fallback {
        principal_direction(inst)
    } else {
        ab.scale(1.0 / ab.norm())
    };
    if cej_seg.midpoint().sub(b).dot(direction) > 0.0 {
        direction = direction.scale(-1.0);
    }
    Ok(ToothAxis {
        a,
        b,
        direction,
        fallback,
    })
}

/// Deepest tooth pixel along the axis on each side of it. Pixels on the axis
/// belong to both sides; an empty side takes the other side's apex.
pub fn root_apices(inst: &ToothInstance, axis: &ToothAxis) -> (Point, Point) {
    let d = axis.direction;
    // normal with a non-negative column component points to the right
    let n = if d.row >= 0.0 {
        Point::new(-d.col, d.row)
    } else {
        Point::new(d.col, -d.row)
    };
    let mut left: Option<(f64, Point)> = None;
    let mut right: Option<(f64, Point)> = None;
    for px in inst.tooth_pixels() {
        let p = Point::new(px.row as f64, px.col as f64);
        let rel = p.sub(axis.b);
        let depth = rel.dot(d);
        let side = rel.dot(n);
        if side <= 0.0 && left.is_none_or(|(best, _)| depth > best) {
            left = Some((depth, p));
        }
        if side >= 0.0 && right.is_none_or(|(best, _)| depth > best) {
            right = Some((depth, p));
        }
    }
    match (left, right) {
        (Some((_, l)), Some((_, r))) => (l, r),
        (Some((_, l)), None) => (l, l),
        (None, Some((_, r))) => (r, r),
        (None, None) => unreachable!("tooth instances are never empty"),
    }
}

/// Row of the polyline as a piecewise-linear function of column; beyond its
/// ends the chord to the point five columns inward is extended.
fn polyline_pieces(cej: &Polyline) -> Vec<(f64, f64, f64, f64)> {
    // (col_from, col_to, row_at_col_from, slope)
    let pts = &cej.points;
    let n = pts.len();
    if n == 1 {
        let p = pts[0];
        return vec![(f64::NEG_INFINITY, f64::INFINITY, p.row, 0.0)];
    }
    let k = 5.min(n - 1);
    let mut pieces = Vec::with_capacity(n + 1);
    let (f, fi) = (pts[0], pts[k]);
    let slope_l = (fi.row - f.row) / (fi.col - f.col) as f64;
    pieces.push((f64::NEG_INFINITY, f.col as f64, f.row, slope_l));
    for w in pts.windows(2) {
        pieces.push((w[0].col as f64, w[1].col as f64, w[0].row, w[1].row - w[0].row));
    }
    let (l, li) = (pts[n - 1], pts[n - 1 - k]);
    let slope_r = (l.row - li.row) / (l.col - li.col) as f64;
    pieces.push((l.col as f64, f64::INFINITY, l.row, slope_r));
    pieces
}

/// Distance from `apex` along `-direction` to the (extended) CEJ polyline.
fn root_line(apex: Point, direction: Point, cej: &Polyline) -> Option<(f64, Point)> {
    if cej.is_empty() {
        return None;
    }
    let u = direction.scale(-1.0);
    let mut best: Option<f64> = None;
    for (c0, c1, r0, m) in polyline_pieces(cej) {
        // anchor the line at a finite column
        let anchor = if c0.is_finite() { c0 } else { c1 };
        // row(c) = r0 + m (c - anchor); ray p = apex + t u
        let denom = u.row - m * u.col;
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (r0 + m * (apex.col - anchor) - apex.row) / denom;
        if t <= 0.0 {
            continue;
        }
        let col = apex.col + t * u.col;
        if col < c0 - 1e-9 || col > c1 + 1e-9 {
            continue;
        }
        if best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best.map(|t| (t, apex.add(u.scale(t))))
}

/// Contact segments, axis, apices, the CEJ-to-crest (`line1_*`) and
/// CEJ-to-apex (`line2_*`) lengths on both sides, and the RBL percentage
/// `max(line1_left / line2_left, line1_right / line2_right) * 100` clamped to
/// `[0, 100]`.
///
/// `line1_*` is zero on a side whose bone contact lies crownward of the CEJ
/// contact.
pub fn measure_rbl(inst: &ToothInstance) -> Result<RblMeasurement> {
    let bone_seg = tooth_bone_intersection(inst)?;
    let cej_seg = tooth_cej_intersection(inst)?;
    let axis = tooth_axis(inst, &bone_seg, &cej_seg)?;
    let (apex_left, apex_right) = root_apices(inst, &axis);

    let line1 = |cej: Point, bone: Point| {
        if bone.sub(cej).dot(axis.direction) < 0.0 {
            0.0
        } else {
            cej.dist(bone)
        }
    };
    let line1_left = line1(cej_seg.a, bone_seg.a);
    let line1_right = line1(cej_seg.b, bone_seg.b);
    let (line2_left, cej_hit_left) =
        root_line(apex_left, axis.direction, &inst.cej).ok_or(Error::NoCejContact)?;
    let (line2_right, cej_hit_right) =
        root_line(apex_right, axis.direction, &inst.cej).ok_or(Error::NoCejContact)?;

    let rbl_percent = rbl_from_lines(line1_left, line2_left, line1_right, line2_right);
    Ok(RblMeasurement {
        line1_left,
        line1_right,
        line2_left,
        line2_right,
        rbl_percent,
        apex_left,
        apex_right,
        cej_hit_left,
        cej_hit_right,
        cej_seg,
        bone_seg,
        axis,
        implausible: line2_left <= line1_left && line2_right <= line1_right,
    })
}

fn rbl_from_lines(l1l: f64, l2l: f64, l1r: f64, l2r: f64) -> f64 {
    ((l1l / l2l).max(l1r / l2r) * 100.0).clamp(0.0, 100.0)
}

impl RblMeasurement {
    /// Recomputes the percentage from the stored line lengths.
    pub fn recompute_rbl(&self) -> f64 {
        rbl_from_lines(
            self.line1_left,
            self.line2_left,
            self.line1_right,
            self.line2_right,
        )
    }
}
