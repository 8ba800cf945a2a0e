use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodontitis stage, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
    III,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::I, Stage::II, Stage::III];

    /// Class index used by the classifier and the metrics tables.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::I => "I",
            Stage::II => "II",
            Stage::III => "III",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(Stage::I),
            "II" | "2" => Ok(Stage::II),
            "III" | "3" => Ok(Stage::III),
            other => Err(Error::input(format!("unknown stage label {other:?}"))),
        }
    }
}

/// RBL percentage cut points between stages I/II (`t1`) and II/III (`t2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageThresholds {
    pub t1: f64,
    pub t2: f64,
}

impl Default for StageThresholds {
    fn default() -> Self {
        Self { t1: 15.0, t2: 33.0 }
    }
}

impl StageThresholds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let th = Self { t1, t2 };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.t1 && self.t1 < self.t2 && self.t2 < 100.0 {
            Ok(())
        } else {
            Err(Error::param(format!(
                "thresholds must satisfy 0 < t1 < t2 < 100, got t1={}, t2={}",
                self.t1, self.t2
            )))
        }
    }
}

/// Stage I below `t1`, II on `[t1, t2)`, III from `t2` up.
pub fn assign_stage(rbl_percent: f64, th: &StageThresholds) -> Result<Stage> {
    th.validate()?;
    if !(0.0..=100.0).contains(&rbl_percent) {
        return Err(Error::param(format!(
            "RBL {rbl_percent} outside [0, 100]"
        )));
    }
    Ok(if rbl_percent < th.t1 {
        Stage::I
    } else if rbl_percent < th.t2 {
        Stage::II
    } else {
        Stage::III
    })
}
