use super::analyze::{instances, AnalyzeOptions};
use crate::error::{Error, Result};
use crate::geometry::Stage;
use crate::neural::{crop_tensor, Dataset, Targets, Tensor};
use crate::phantom::{generate_corpus, shape_dataset, CorpusScene, NoiseLevel};
use crate::raster::ToothInstance;

/// Instances of one corpus scene paired with the truth of the phantom tooth
/// whose centre column lies inside each instance box.
pub fn matched_instances(scene: &CorpusScene, opts: &AnalyzeOptions) -> Result<Vec<(ToothInstance, Stage)>> {
    let r = &scene.render;
    let insts = instances(&r.tooth, &r.bone, &r.cej, opts)?;
    let mut out = Vec::with_capacity(insts.len());
    for inst in insts {
        let hit = r.truth.iter().find(|t| {
            let c = scene.scene.teeth[t.id - 1].center_col.round() as usize;
            (inst.bbox.left..=inst.bbox.right).contains(&c)
        });
        if let Some(t) = hit {
            out.push((inst, t.stage));
        }
    }
    Ok(out)
}

/// Classifier crops with stage labels from a generated corpus, taking at most
/// `per_stage` crops of each stage.
pub fn stage_crops(corpus: &[CorpusScene], size: usize, per_stage: usize) -> Result<(Vec<Tensor>, Vec<Stage>)> {
    let opts = AnalyzeOptions::default();
    let mut counts = [0usize; 3];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for scene in corpus {
        for (inst, stage) in matched_instances(scene, &opts)? {
            if counts[stage.index()] < per_stage {
                counts[stage.index()] += 1;
                xs.push(crop_tensor(&inst, size)?);
                ys.push(stage);
            }
        }
        if counts.iter().all(|&c| c >= per_stage) {
            break;
        }
    }
    Ok((xs, ys))
}

/// Balanced crop set: `per_stage` crops of each stage from a corpus generated
/// with `seed`. Scenes are generated in growing batches until every stage is
/// filled.
pub fn balanced_stage_crops(per_stage: usize, size: usize, seed: u64, noise: NoiseLevel) -> Result<(Vec<Tensor>, Vec<Stage>)> {
    // stage III is the scarcest: about one lead tooth per three scenes
    let mut n_scenes = (3 * per_stage).max(3);
    loop {
        let corpus = generate_corpus(n_scenes, seed, noise)?;
        let (xs, ys) = stage_crops(&corpus, size, per_stage)?;
        if ys.len() == 3 * per_stage {
            return Ok((xs, ys));
        }
        if n_scenes > 100 * per_stage.max(1) {
            return Err(Error::input("phantom corpus did not yield enough crops per stage"));
        }
        n_scenes *= 2;
    }
}

pub fn classifier_dataset(xs: Vec<Tensor>, ys: &[Stage]) -> Dataset {
    Dataset {
        inputs: xs,
        targets: Targets::Classes(ys.iter().map(|s| s.index()).collect()),
    }
}

/// Synthetic shape images and masks as a segmentation dataset of
/// `[1, size, size]` tensors.
pub fn shape_segmentation_dataset(n: usize, size: usize, seed: u64) -> Dataset {
    let (inputs, targets) = shape_dataset(n, size, seed)
        .into_iter()
        .map(|(img, mask)| {
            let x = Tensor {
                shape: vec![1, size, size],
                data: img.data().to_vec(),
            };
            let y = Tensor {
                shape: vec![1, size, size],
                data: mask.bits().iter().map(|&b| f64::from(u8::from(b))).collect(),
            };
            (x, y)
        })
        .unzip();
    Dataset {
        inputs,
        targets: Targets::Masks(targets),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_crops() {
        let (xs, ys) = balanced_stage_crops(4, 32, 3, NoiseLevel::Clean).unwrap();
        assert_eq!(xs.len(), 12);
        for s in Stage::ALL {
            assert_eq!(ys.iter().filter(|&&y| y == s).count(), 4);
        }
        assert!(xs.iter().all(|x| x.shape == [3, 32, 32]));
    }

    #[test]
    fn shapes_as_tensors() {
        let d = shape_segmentation_dataset(3, 16, 1);
        assert_eq!(d.len(), 3);
        assert_eq!(d.inputs[0].shape, vec![1, 16, 16]);
    }
}
