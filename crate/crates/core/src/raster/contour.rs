use super::{Mask, Pixel};
use crate::error::{Error, Result};

/// Closed boundary of a component; the first point follows the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<Pixel>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arithmetic mean of the contour points as `(row, col)`.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.points.len() as f64;
        let (sr, sc) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.row as f64, b + p.col as f64));
        (sr / n, sc / n)
    }
}

// Clockwise on screen (row grows downward), starting at west.
const DIRS: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

fn dir_index(dr: isize, dc: isize) -> usize {
    DIRS.iter()
        .position(|&d| d == (dr, dc))
        .expect("offset between 8-neighbors")
}

/// Moore-neighbour boundary trace of a single-component mask.
///
/// Starts at the topmost, then leftmost, foreground pixel and walks clockwise.
/// The trace stops when it is about to repeat its first move, so pixels on
/// one-pixel-wide spurs can appear twice. A lone pixel yields a one-point
/// contour.
pub fn trace_contour(component: &Mask) -> Result<Contour> {
    let start = component.pixels().next().ok_or(Error::NoComponent)?;
    let (sr, sc) = (start.row as isize, start.col as isize);

    // The west neighbour of the start is background by construction.
    let mut cur = (sr, sc);
    let mut back = 0usize;
    let mut points = vec![start];
    let mut first_move: Option<((isize, isize), (isize, isize))> = None;

    loop {
        let mut next = None;
        for step in 1..=8 {
            let k = (back + step) % 8;
            let (dr, dc) = DIRS[k];
            let cand = (cur.0 + dr, cur.1 + dc);
            if component.get_signed(cand.0, cand.1) {
                let (pr, pc) = DIRS[(k + 7) % 8];
                let prev = (cur.0 + pr, cur.1 + pc);
                next = Some((cand, dir_index(prev.0 - cand.0, prev.1 - cand.1)));
                break;
            }
        }
        let Some((nxt, nback)) = next else {
            // isolated pixel
            return Ok(Contour { points });
        };
        match first_move {
            None => first_move = Some((cur, nxt)),
            Some(fm) if fm == (cur, nxt) => break,
            Some(_) => {}
        }
        if nxt == (sr, sc) {
            // closing onto the start: only stop if the next move repeats the first
            cur = nxt;
            back = nback;
            continue;
        }
        points.push(Pixel::new(nxt.0 as usize, nxt.1 as usize));
        cur = nxt;
        back = nback;
    }
    Ok(Contour { points })
}
