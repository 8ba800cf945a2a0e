use super::model::ModelGraph;
use super::Tensor;
use crate::error::{Error, Result};
use crate::geometry::Stage;
use crate::raster::{apply_heatmap, resize, ToothInstance};

/// Classifier input for one tooth: the rendered clip region resized to
/// `size` x `size`, passed through the heatmap colour table and scaled to
/// `[0, 1]` as a `[3, size, size]` tensor.
pub fn crop_tensor(inst: &ToothInstance, size: usize) -> Result<Tensor> {
    let crop = resize(&inst.render_crop(), size, size)?;
    let rgb = apply_heatmap(&crop);
    let plane = size * size;
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in rgb.data.chunks_exact(3).enumerate() {
        for ch in 0..3 {
            data[ch * plane + i] = f64::from(px[ch]) / 255.0;
        }
    }
    Tensor::new(vec![3, size, size], data)
}

/// Most probable stage; exact ties go to the more severe stage.
pub fn argmax_stage(probs: &[f64]) -> Result<Stage> {
    if probs.len() != 3 || probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::input(format!("expected 3 finite probabilities, got {probs:?}")));
    }
    let mut best = 0;
    for i in 1..3 {
        if probs[i] >= probs[best] {
            best = i;
        }
    }
    Ok(Stage::from_index(best).expect("index below 3"))
}

/// Runs a stage classifier on one tooth instance.
pub fn predict_stage(model: &ModelGraph, inst: &ToothInstance) -> Result<(Stage, [f64; 3])> {
    let size = match model.input[..] {
        [3, h, w] if h == w && h > 0 => h,
        _ => {
            return Err(Error::InvalidModel(format!(
                "classifier must take square [3, s, s] input, model declares {:?}",
                model.input
            )))
        }
    };
    let x = crop_tensor(inst, size)?;
    let batch = Tensor::stack(&[&x])?;
    let out = model.predict(&batch).map_err(|e| match e {
        Error::Shape { layer, message } => Error::InvalidModel(format!("{layer}: {message}")),
        other => other,
    })?;
    if out.shape != [1, 3] {
        return Err(Error::InvalidModel(format!(
            "classifier output shape {:?}, expected [1, 3]",
            out.shape
        )));
    }
    let probs = [out.data[0], out.data[1], out.data[2]];
    Ok((argmax_stage(&probs)?, probs))
}
