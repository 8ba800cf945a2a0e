use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{assign_stage, measure_rbl, RblMeasurement, Stage, StageThresholds};
use crate::neural::{predict_stage, ModelGraph};
use crate::raster::{
    binarize, default_min_area, extract_tooth_instances, gaussian_smooth, io, overlay, BoundingBox, GrayImage,
    Mask, ToothInstance, DEFAULT_SIGMA, DEFAULT_THRESHOLD,
};

pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Threshold for the smoothed CEJ mask. A one-pixel line peaks near 0.4 after
/// a unit-sigma blur, so the area threshold would erase it.
pub const CEJ_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub thresholds: StageThresholds,
    pub sigma: f64,
    /// Minimum component area in pixels; `None` uses 0.1% of the image.
    pub min_area: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            thresholds: StageThresholds::default(),
            sigma: DEFAULT_SIGMA,
            min_area: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ToothFlags {
    pub truncated: bool,
    pub implausible: bool,
    pub no_bone_contact: bool,
    pub no_cej_contact: bool,
    pub axis_fallback: bool,
}

impl ToothFlags {
    /// Flags that make the measurement unusable for staging.
    pub fn has_error(&self) -> bool {
        self.implausible || self.no_bone_contact || self.no_cej_contact
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToothReport {
    pub id: usize,
    pub bbox: BoundingBox,
    pub measurement: Option<RblMeasurement>,
    pub stage_rule: Option<Stage>,
    pub stage_classifier: Option<Stage>,
    pub classifier_probs: Option<[f64; 3]>,
    pub flags: ToothFlags,
    pub error: Option<String>,
}

impl ToothReport {
    pub fn rbl_percent(&self) -> Option<f64> {
        self.measurement.as_ref().map(|m| m.rbl_percent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub teeth: Vec<ToothReport>,
    pub thresholds: StageThresholds,
    pub version: String,
    pub warnings: Vec<String>,
}

impl StageReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Content hash of the three masks (dimensions and pixel bits).
pub fn image_id(tooth: &Mask, bone: &Mask, cej: &Mask) -> String {
    let mut h = Sha256::new();
    for m in [tooth, bone, cej] {
        h.update((m.width() as u64).to_le_bytes());
        h.update((m.height() as u64).to_le_bytes());
        let packed: Vec<u8> = m
            .bits()
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << i)))
            .collect();
        h.update(&packed);
    }
    hex::encode(&h.finalize()[..16])
}

fn check_dims(tooth: &Mask, bone: &Mask, cej: &Mask) -> Result<()> {
    if tooth.same_dims(bone) && tooth.same_dims(cej) {
        Ok(())
    } else {
        Err(Error::input(format!(
            "mask dimensions differ: tooth {}x{}, bone {}x{}, cej {}x{}",
            tooth.width(),
            tooth.height(),
            bone.width(),
            bone.height(),
            cej.width(),
            cej.height()
        )))
    }
}

/// Gaussian smoothing and re-binarisation of the three masks.
pub fn postprocess(tooth: &Mask, bone: &Mask, cej: &Mask, sigma: f64) -> Result<(Mask, Mask, Mask)> {
    check_dims(tooth, bone, cej)?;
    let sm = |m: &Mask, t: f64| -> Result<Mask> { Ok(binarize(&gaussian_smooth(&GrayImage::from(m), sigma)?, t)) };
    Ok((sm(tooth, DEFAULT_THRESHOLD)?, sm(bone, DEFAULT_THRESHOLD)?, sm(cej, CEJ_THRESHOLD)?))
}

/// Postprocessed per-tooth instances, ordered left to right.
pub fn instances(tooth: &Mask, bone: &Mask, cej: &Mask, opts: &AnalyzeOptions) -> Result<Vec<ToothInstance>> {
    let (t, b, c) = postprocess(tooth, bone, cej, opts.sigma)?;
    let min_area = opts.min_area.unwrap_or_else(|| default_min_area(t.width(), t.height()));
    extract_tooth_instances(&t, &b, &c, min_area)
}

fn rule_stage(m: &RblMeasurement, flags: &ToothFlags, th: &StageThresholds) -> Result<Option<Stage>> {
    if flags.has_error() {
        Ok(None)
    } else {
        assign_stage(m.rbl_percent, th).map(Some)
    }
}

fn tooth_report(inst: &ToothInstance, th: &StageThresholds, model: Option<&ModelGraph>) -> Result<ToothReport> {
    let mut flags = ToothFlags {
        truncated: inst.truncated,
        ..ToothFlags::default()
    };
    let mut error = None;
    let measurement = match measure_rbl(inst) {
        Ok(m) => {
            flags.implausible = m.implausible;
            flags.axis_fallback = m.axis.fallback;
            Some(m)
        }
        Err(e) => {
            match e {
                Error::NoBoneContact => flags.no_bone_contact = true,
                Error::NoCejContact => flags.no_cej_contact = true,
                _ => {}
            }
            error = Some(e.to_string());
            None
        }
    };
    let stage_rule = match &measurement {
        Some(m) => rule_stage(m, &flags, th)?,
        None => None,
    };
    let (stage_classifier, classifier_probs) = match model {
        Some(model) => {
            let (s, p) = predict_stage(model, inst)?;
            (Some(s), Some(p))
        }
        None => (None, None),
    };
    Ok(ToothReport {
        id: inst.id,
        bbox: inst.bbox,
        measurement,
        stage_rule,
        stage_classifier,
        classifier_probs,
        flags,
        error,
    })
}

/// Measures and stages every tooth. Per-tooth failures become flags; only
/// invalid inputs, thresholds or models abort.
pub fn analyze(
    tooth: &Mask,
    bone: &Mask,
    cej: &Mask,
    model: Option<&ModelGraph>,
    opts: &AnalyzeOptions,
) -> Result<StageReport> {
    opts.thresholds.validate()?;
    let insts = instances(tooth, bone, cej, opts)?;
    let mut warnings = Vec::new();
    if insts.is_empty() {
        warnings.push("no tooth found in the tooth mask".to_string());
    }
    let teeth = insts
        .iter()
        .map(|i| tooth_report(i, &opts.thresholds, model))
        .collect::<Result<Vec<_>>>()?;
    for t in &teeth {
        if let Some(e) = &t.error {
            warnings.push(format!("tooth {}: {e}", t.id));
        }
    }
    Ok(StageReport {
        image_id: image_id(tooth, bone, cej),
        width: tooth.width(),
        height: tooth.height(),
        teeth,
        thresholds: opts.thresholds,
        version: PIPELINE_VERSION.to_string(),
        warnings,
    })
}

/// Re-assigns rule stages from the stored RBL values under new thresholds.
pub fn restage(report: &StageReport, th: StageThresholds) -> Result<StageReport> {
    th.validate()?;
    let mut out = report.clone();
    out.thresholds = th;
    for t in &mut out.teeth {
        t.stage_rule = match &t.measurement {
            Some(m) => rule_stage(m, &t.flags, &th)?,
            None => None,
        };
    }
    Ok(out)
}

/// Indexed-colour PNG of the label overlay of the raw masks.
pub fn overlay_png(tooth: &Mask, bone: &Mask, cej: &Mask) -> Result<Vec<u8>> {
    io::encode_overlay(&overlay(tooth, bone, cej)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{render, PhantomScene, PhantomToothSpec};

    fn scene() -> PhantomScene {
        PhantomScene::new(
            240,
            180,
            vec![
                PhantomToothSpec::upright(60.0, 60.0, 30.0, 90.0).with_bone(8.0, 10.0),
                PhantomToothSpec::upright(125.0, 60.0, 30.0, 90.0).with_bone(20.0, 24.0),
                PhantomToothSpec::upright(190.0, 60.0, 30.0, 90.0).with_bone(40.0, 36.0),
            ],
        )
    }

    #[test]
    fn phantom_stages_match_truth() {
        let r = render(&scene()).unwrap();
        let rep = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default()).unwrap();
        assert_eq!(rep.teeth.len(), 3);
        for (t, truth) in rep.teeth.iter().zip(&r.truth) {
            assert_eq!(t.stage_rule, Some(truth.stage));
            assert!((t.rbl_percent().unwrap() - truth.rbl_percent).abs() <= 2.0);
        }
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn empty_masks_give_empty_report() {
        let m = Mask::new(50, 40);
        let rep = analyze(&m, &m, &m, None, &AnalyzeOptions::default()).unwrap();
        assert!(rep.teeth.is_empty());
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn missing_cej_is_flagged() {
        let r = render(&scene()).unwrap();
        // erase the CEJ over the third tooth
        let cej = Mask::from_fn(240, 180, |row, col| r.cej.get(row, col) && col < 160);
        let rep = analyze(&r.tooth, &r.bone, &cej, None, &AnalyzeOptions::default()).unwrap();
        assert!(rep.teeth[2].flags.no_cej_contact);
        assert_eq!(rep.teeth[2].stage_rule, None);
        assert!(rep.teeth[..2].iter().all(|t| t.stage_rule.is_some()));
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let r = render(&scene()).unwrap();
        let a = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default()).unwrap();
        let b = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(StageReport::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn restage_keeps_rbl() {
        let r = render(&scene()).unwrap();
        let a = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default()).unwrap();
        assert_eq!(restage(&a, StageThresholds::default()).unwrap(), a);
        let low = restage(&a, StageThresholds::new(5.0, 10.0).unwrap()).unwrap();
        assert!(low.teeth.iter().all(|t| t.stage_rule == Some(Stage::III) || t.rbl_percent().unwrap() < 10.0));
        for (x, y) in a.teeth.iter().zip(&low.teeth) {
            assert_eq!(x.measurement, y.measurement);
        }
        assert!(restage(&a, StageThresholds { t1: 40.0, t2: 20.0 }).is_err());
    }

    #[test]
    fn id_depends_on_content() {
        let r = render(&scene()).unwrap();
        let a = image_id(&r.tooth, &r.bone, &r.cej);
        assert_eq!(a, image_id(&r.tooth, &r.bone, &r.cej));
        assert_ne!(a, image_id(&r.bone, &r.tooth, &r.cej));
        assert_eq!(a.len(), 32);
    }
}
