use serde::{Deserialize, Serialize};

use super::Mask;
use crate::error::{Error, Result};

/// One column sample of a polyline. `observed` is false for rows filled in
/// by interpolation across columns without foreground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolylinePoint {
    pub row: f64,
    pub col: usize,
    pub observed: bool,
}

/// Open polyline with exactly one point per column over a contiguous span.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<PolylinePoint>,
}

impl Polyline {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn first_col(&self) -> Option<usize> {
        self.points.first().map(|p| p.col)
    }

    pub fn last_col(&self) -> Option<usize> {
        self.points.last().map(|p| p.col)
    }

    /// Row at a column inside the span.
    pub fn row_at(&self, col: usize) -> Option<f64> {
        let first = self.first_col()?;
        self.points.get(col.checked_sub(first)?).map(|p| p.row)
    }

    /// Sub-polyline restricted to `[left, right]` columns.
    pub fn clip_cols(&self, left: usize, right: usize) -> Polyline {
        Polyline {
            points: self
                .points
                .iter()
                .filter(|p| p.col >= left && p.col <= right)
                .copied()
                .collect(),
        }
    }

    /// Checks the one-point-per-column, contiguous-span invariant.
    pub fn is_well_formed(&self) -> bool {
        self.points.windows(2).all(|w| w[1].col == w[0].col + 1)
    }
}

/// Vertical runs of foreground in one column, as run-centre rows.
fn run_centers(m: &Mask, col: usize) -> Vec<f64> {
    let mut centers = Vec::new();
    let mut start: Option<usize> = None;
    for r in 0..=m.height() {
        let on = r < m.height() && m.get(r, col);
        match (on, start) {
            (true, None) => start = Some(r),
            (false, Some(s)) => {
                centers.push((s + r - 1) as f64 / 2.0);
                start = None;
            }
            _ => {}
        }
    }
    centers
}

/// Walks a line mask left to right, one point per column.
///
/// The walk starts at the first run of the first non-empty column and in
/// each later column takes the vertical run whose centre is nearest the
/// previously chosen row. A one-pixel line therefore yields its own pixels;
/// thick lines yield their centre line. Columns without foreground inside the
/// span are filled by linear interpolation between the flanking chosen rows.
pub fn trace_cej_polyline(m: &Mask) -> Result<Polyline> {
    let cols: Vec<Vec<f64>> = (0..m.width()).map(|c| run_centers(m, c)).collect();
    let first = cols.iter().position(|c| !c.is_empty()).ok_or(Error::NoLine)?;
    let last = cols.iter().rposition(|c| !c.is_empty()).ok_or(Error::NoLine)?;

    let mut rows: Vec<Option<f64>> = Vec::with_capacity(last - first + 1);
    let mut prev = cols[first][0];
    rows.push(Some(prev));
    for centers in &cols[first + 1..=last] {
        let best = centers.iter().copied().min_by(|a, b| {
            (a - prev)
                .abs()
                .partial_cmp(&(b - prev).abs())
                .expect("finite rows")
                .then(a.partial_cmp(b).expect("finite rows"))
        });
        if let Some(r) = best {
            prev = r;
        }
        rows.push(best);
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        if let Some(r) = rows[i] {
            points.push(PolylinePoint {
                row: r,
                col: first + i,
                observed: true,
            });
            i += 1;
            continue;
        }
        // gap: rows[i - 1] and the next Some bound it (ends are always observed)
        let left = rows[i - 1].expect("gap has a left neighbour");
        let j = (i..rows.len())
            .find(|&j| rows[j].is_some())
            .expect("gap has a right neighbour");
        let right = rows[j].expect("checked");
        let span = (j - (i - 1)) as f64;
        for k in i..j {
            let t = (k - (i - 1)) as f64 / span;
            points.push(PolylinePoint {
                row: left + t * (right - left),
                col: first + k,
                observed: false,
            });
        }
        i = j;
    }
    Ok(Polyline { points })
}
