use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{field, render, NoiseSpec, PhantomRender, PhantomScene, PhantomToothSpec, ToothTruth};
use crate::error::{Error, Result};
use crate::geometry::Stage;
use crate::raster::io;

pub const CANVAS_WIDTH: usize = 320;
pub const CANVAS_HEIGHT: usize = 200;

/// Preset difficulty for generated corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseLevel {
    Clean,
    Mild,
    Heavy,
}

impl NoiseLevel {
    pub fn from_ordinal(level: u8) -> Result<Self> {
        match level {
            0 => Ok(NoiseLevel::Clean),
            1 => Ok(NoiseLevel::Mild),
            2 => Ok(NoiseLevel::Heavy),
            other => Err(Error::param(format!("noise level {other} is not one of 0, 1, 2"))),
        }
    }

    pub fn spec(self) -> NoiseSpec {
        match self {
            NoiseLevel::Clean => NoiseSpec::default(),
            NoiseLevel::Mild => NoiseSpec {
                jitter_sigma: 0.75,
                speckle_rate: 0.001,
            },
            NoiseLevel::Heavy => NoiseSpec {
                jitter_sigma: 2.5,
                speckle_rate: 0.005,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScene {
    pub index: usize,
    pub scene: PhantomScene,
    pub render: PhantomRender,
}

impl CorpusScene {
    pub fn name(&self) -> String {
        format!("scene_{:04}", self.index)
    }

    /// Most severe stage among the scene's teeth.
    pub fn scene_stage(&self) -> Stage {
        self.render
            .truth
            .iter()
            .map(|t| t.stage)
            .max()
            .unwrap_or(Stage::I)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub teeth: Vec<ToothTruth>,
}

/// RBL range sampled for each stage; a 2-point band around the default
/// thresholds is left out so every tooth has an unambiguous stage.
fn rbl_range(stage: Stage) -> (f64, f64) {
    match stage {
        Stage::I => (1.0, 13.0),
        Stage::II => (17.0, 31.0),
        Stage::III => (35.0, 60.0),
    }
}

fn random_tooth(rng: &mut ChaCha8Rng, center: f64, stage: Stage) -> PhantomToothSpec {
    let roots = if rng.random_bool(0.3) { 2 } else { 1 };
    let crown_width = if roots == 2 {
        rng.random_range(36.0..=44.0)
    } else {
        rng.random_range(24.0..=34.0)
    };
    let root_length: f64 = rng.random_range(80.0..=100.0);
    let h = root_length / 2.0;
    let cej_row = rng.random_range(h + 12.0..=CANVAS_HEIGHT as f64 - root_length - 14.0);
    let (lo, hi) = rbl_range(stage);
    let worst = rng.random_range(lo..=hi) / 100.0 * root_length;
    let other = worst * rng.random_range(0.4..=1.0);
    let (left, right) = if rng.random_bool(0.5) {
        (worst, other)
    } else {
        (other, worst)
    };
    PhantomToothSpec {
        center_col: center,
        crown_width,
        root_length,
        cej_row,
        bone_offset_left: left,
        bone_offset_right: right,
        tilt_deg: rng.random_range(-12.0..=12.0),
        roots,
    }
}

/// One scene whose most severe tooth has stage `target`.
fn random_scene(rng: &mut ChaCha8Rng, target: Stage, noise: NoiseSpec, seed: u64) -> PhantomScene {
    loop {
        let n = rng.random_range(2..=3usize);
        let slot = CANVAS_WIDTH as f64 / n as f64;
        let lead = rng.random_range(0..n);
        let teeth = (0..n)
            .map(|k| {
                let stage = if k == lead {
                    target
                } else {
                    Stage::ALL[rng.random_range(0..=target.index())]
                };
                let center = slot * (k as f64 + 0.5) + rng.random_range(-6.0..=6.0);
                random_tooth(rng, center, stage)
            })
            .collect();
        let scene = PhantomScene {
            width: CANVAS_WIDTH,
            height: CANVAS_HEIGHT,
            teeth,
            noise,
            seed,
        };
        if super::validate_scene(&scene).is_ok() {
            return scene;
        }
    }
}

/// Seeded corpus of `n` scenes. Scene `i` is drawn from its own generator
/// seeded with `seed ^ i`; its most severe stage cycles I, II, III with `i`,
/// so scene-level stages are balanced by construction.
pub fn generate_corpus(n: usize, seed: u64, noise: NoiseLevel) -> Result<Vec<CorpusScene>> {
    if n == 0 {
        return Err(Error::param("corpus size must be at least 1"));
    }
    (0..n)
        .map(|index| {
            let scene_seed = seed ^ index as u64;
            let mut rng = field::rng(scene_seed);
            let target = Stage::ALL[index % 3];
            let scene = random_scene(&mut rng, target, noise.spec(), scene_seed);
            let render = render(&scene)?;
            Ok(CorpusScene {
                index,
                scene,
                render,
            })
        })
        .collect()
}

/// Writes `tooth.png`, `bone.png`, `cej.png` and `truth.json` into `dir`.
pub fn write_scene(render: &PhantomRender, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_mask(&render.tooth, dir.join("tooth.png"))?;
    io::write_mask(&render.bone, dir.join("bone.png"))?;
    io::write_mask(&render.cej, dir.join("cej.png"))?;
    let truth = TruthFile {
        teeth: render.truth.clone(),
    };
    std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
    Ok(())
}

/// One sub-directory per scene, named `scene_NNNN`.
pub fn write_corpus(corpus: &[CorpusScene], dir: &Path) -> Result<()> {
    for s in corpus {
        write_scene(&s.render, &dir.join(s.name()))?;
    }
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<TruthFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
