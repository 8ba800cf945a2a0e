//! RBL construction on a single tooth instance and threshold-based staging.

mod rbl;
mod stage;

pub use rbl::{
    measure_rbl, root_apices, tooth_axis, tooth_bone_intersection, tooth_cej_intersection,
    RblMeasurement, ToothAxis,
};
pub use stage::{assign_stage, Stage, StageThresholds};

use serde::{Deserialize, Serialize};

/// Real-valued `(row, col)` position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub const fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.row - o.row, self.col - o.col)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.row + o.row, self.col + o.col)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.row * k, self.col * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.row * o.row + self.col * o.col
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new((self.row + o.row) / 2.0, (self.col + o.col) / 2.0)
    }
}

/// Segment between two points; `a` is the left (smaller column) end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn midpoint(&self) -> Point {
        self.a.midpoint(self.b)
    }
}
