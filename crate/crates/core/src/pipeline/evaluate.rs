use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analyze::{analyze, AnalyzeOptions, StageReport};
use crate::error::{Error, Result};
use crate::geometry::Stage;
use crate::metrics::{
    cohens_kappa, dice, jaccard, majority_vote, pixel_accuracy, roc_auc_ovr, two_sample_t_test, ConfusionMatrix,
    OvrAuc, ScoredSample, TTest,
};
use crate::neural::ModelGraph;
use crate::phantom::{read_truth, TruthFile};
use crate::raster::{io, Mask};

/// `(scene, tooth id)`.
pub type ItemKey = (String, usize);

/// Stage labels from several raters, one column per rater.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RaterTable {
    pub raters: Vec<String>,
    pub rows: BTreeMap<ItemKey, Vec<Stage>>,
}

impl RaterTable {
    /// Parses `scene,tooth,<rater>...` with one stage label per rater cell.
    pub fn from_reader(r: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "scene" || &headers[1] != "tooth" {
            return Err(Error::input("rater table header must be scene,tooth,<rater>..."));
        }
        let raters: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut rows = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let tooth: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad tooth id {:?}", &rec[1])))?;
            let labels = rec.iter().skip(2).map(str::parse).collect::<Result<Vec<Stage>>>()?;
            if labels.len() != raters.len() {
                return Err(Error::input(format!("row for {} tooth {tooth} has {} labels", &rec[0], labels.len())));
            }
            rows.insert((rec[0].to_string(), tooth), labels);
        }
        Ok(Self { raters, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["scene".to_string(), "tooth".to_string()];
        header.extend(self.raters.iter().cloned());
        w.write_record(&header)?;
        for ((scene, tooth), labels) in &self.rows {
            let mut rec = vec![scene.clone(), tooth.to_string()];
            rec.extend(labels.iter().map(|s| s.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRow {
    pub scene: String,
    pub mask: String,
    pub dice: f64,
    pub jaccard: f64,
    pub pixel_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMean {
    pub mask: String,
    pub dice: f64,
    pub jaccard: f64,
    pub pixel_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAgreement {
    /// Rows are truth, columns the prediction.
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaMatrix {
    pub labels: Vec<String>,
    /// Pairwise kappa; the diagonal is 1 and undefined entries are null.
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterSummary {
    pub items: usize,
    pub kappa: KappaMatrix,
    /// Majority label against the phantom truth.
    pub majority_vs_truth: StageAgreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub scene: String,
    pub tooth: usize,
    pub truth_stage: Stage,
    pub truth_rbl: f64,
    pub rule_stage: Stage,
    pub rule_rbl: f64,
    pub classifier_stage: Option<Stage>,
    pub classifier_probs: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBundle {
    pub items: Vec<EvalItem>,
    /// Items left out of every statistic, with the reason.
    pub excluded: Vec<String>,
    pub segmentation: Vec<SegmentationRow>,
    pub segmentation_mean: Vec<SegmentationMean>,
    pub rule: Option<StageAgreement>,
    pub classifier: Option<StageAgreement>,
    pub auc: Option<OvrAuc>,
    pub rbl_mean_abs_error: Option<f64>,
    /// Measured against true RBL.
    pub rbl_ttest: Option<TTest>,
    pub raters: Option<RaterSummary>,
    pub warnings: Vec<String>,
}

fn agreement(truth: &[Stage], pred: &[Stage]) -> Result<StageAgreement> {
    let t: Vec<usize> = truth.iter().map(|s| s.index()).collect();
    let p: Vec<usize> = pred.iter().map(|s| s.index()).collect();
    let confusion = ConfusionMatrix::from_pairs(3, &t, &p)?;
    Ok(StageAgreement {
        accuracy: confusion.accuracy().unwrap_or(0.0),
        kappa: cohens_kappa(&confusion).ok(),
        confusion,
    })
}

/// Pairwise kappa between labelled columns of equal length.
pub fn kappa_matrix(labels: &[String], columns: &[Vec<Stage>]) -> Result<KappaMatrix> {
    let n = columns.len();
    let mut values = vec![vec![Some(1.0); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a: Vec<usize> = columns[i].iter().map(|s| s.index()).collect();
            let b: Vec<usize> = columns[j].iter().map(|s| s.index()).collect();
            let k = cohens_kappa(&ConfusionMatrix::from_pairs(3, &a, &b)?).ok();
            values[i][j] = k;
            values[j][i] = k;
        }
    }
    Ok(KappaMatrix {
        labels: labels.to_vec(),
        values,
    })
}

/// Matches predicted teeth to truth records by `(scene, tooth id)` and
/// computes every statistic over the same matched item set.
pub fn evaluate(
    preds: &BTreeMap<String, StageReport>,
    truths: &BTreeMap<String, TruthFile>,
    raters: Option<&RaterTable>,
) -> Result<EvalBundle> {
    let mut items = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for (scene, truth) in truths {
        let Some(report) = preds.get(scene) else {
            excluded.push(format!("{scene}: no prediction"));
            continue;
        };
        for t in &truth.teeth {
            let Some(p) = report.teeth.iter().find(|p| p.id == t.id) else {
                excluded.push(format!("{scene} tooth {}: not detected", t.id));
                continue;
            };
            let (Some(stage), Some(rbl)) = (p.stage_rule, p.rbl_percent()) else {
                excluded.push(format!("{scene} tooth {}: no rule stage ({})", t.id, p.error.as_deref().unwrap_or("flagged")));
                continue;
            };
            if let Some(r) = raters {
                if !r.rows.contains_key(&(scene.clone(), t.id)) {
                    excluded.push(format!("{scene} tooth {}: no rater labels", t.id));
                    continue;
                }
            }
            items.push(EvalItem {
                scene: scene.clone(),
                tooth: t.id,
                truth_stage: t.stage,
                truth_rbl: t.rbl_percent,
                rule_stage: stage,
                rule_rbl: rbl,
                classifier_stage: p.stage_classifier,
                classifier_probs: p.classifier_probs,
            });
        }
        for p in &report.teeth {
            if !truth.teeth.iter().any(|t| t.id == p.id) {
                excluded.push(format!("{scene} tooth {}: no truth record", p.id));
            }
        }
    }
    for scene in preds.keys().filter(|s| !truths.contains_key(*s)) {
        excluded.push(format!("{scene}: no truth"));
    }

    let truth_stages: Vec<Stage> = items.iter().map(|i| i.truth_stage).collect();
    let mut bundle = EvalBundle {
        items: Vec::new(),
        excluded,
        segmentation: Vec::new(),
        segmentation_mean: Vec::new(),
        rule: None,
        classifier: None,
        auc: None,
        rbl_mean_abs_error: None,
        rbl_ttest: None,
        raters: None,
        warnings: Vec::new(),
    };
    if items.is_empty() {
        warnings.push("no matched items".into());
        bundle.warnings = warnings;
        return Ok(bundle);
    }
    let rule: Vec<Stage> = items.iter().map(|i| i.rule_stage).collect();
    bundle.rule = Some(agreement(&truth_stages, &rule)?);

    let measured: Vec<f64> = items.iter().map(|i| i.rule_rbl).collect();
    let true_rbl: Vec<f64> = items.iter().map(|i| i.truth_rbl).collect();
    bundle.rbl_mean_abs_error =
        Some(measured.iter().zip(&true_rbl).map(|(a, b)| (a - b).abs()).sum::<f64>() / items.len() as f64);
    match two_sample_t_test(&measured, &true_rbl) {
        Ok(t) => bundle.rbl_ttest = Some(t),
        Err(e) => warnings.push(format!("RBL t-test: {e}")),
    }

    if items.iter().all(|i| i.classifier_stage.is_some()) {
        let cls: Vec<Stage> = items.iter().filter_map(|i| i.classifier_stage).collect();
        bundle.classifier = Some(agreement(&truth_stages, &cls)?);
        let samples: Vec<ScoredSample> = items
            .iter()
            .filter_map(|i| {
                i.classifier_probs.map(|p| ScoredSample {
                    scores: p.to_vec(),
                    true_class: i.truth_stage.index(),
                })
            })
            .collect();
        match roc_auc_ovr(&samples) {
            Ok(a) => bundle.auc = Some(a),
            Err(e) => warnings.push(format!("AUC: {e}")),
        }
    }

    if let Some(r) = raters {
        let mut labels: Vec<String> = r.raters.clone();
        let mut columns: Vec<Vec<Stage>> = (0..r.raters.len())
            .map(|k| items.iter().map(|i| r.rows[&(i.scene.clone(), i.tooth)][k]).collect())
            .collect();
        let majority = items
            .iter()
            .map(|i| majority_vote(&r.rows[&(i.scene.clone(), i.tooth)]))
            .collect::<Result<Vec<Stage>>>()?;
        labels.push("rule".into());
        columns.push(rule.clone());
        if let Some(cls) = items.iter().map(|i| i.classifier_stage).collect::<Option<Vec<_>>>() {
            labels.push("classifier".into());
            columns.push(cls);
        }
        labels.push("truth".into());
        columns.push(truth_stages.clone());
        bundle.raters = Some(RaterSummary {
            items: items.len(),
            kappa: kappa_matrix(&labels, &columns)?,
            majority_vs_truth: agreement(&truth_stages, &majority)?,
        });
    }
    bundle.items = items;
    bundle.warnings = warnings;
    Ok(bundle)
}

pub fn segmentation_row(scene: &str, mask: &str, pred: &Mask, truth: &Mask) -> Result<SegmentationRow> {
    Ok(SegmentationRow {
        scene: scene.to_string(),
        mask: mask.to_string(),
        dice: dice(pred, truth)?,
        jaccard: jaccard(pred, truth)?,
        pixel_accuracy: pixel_accuracy(pred, truth)?,
    })
}

fn segmentation_means(rows: &[SegmentationRow]) -> Vec<SegmentationMean> {
    ["tooth", "bone", "cej"]
        .iter()
        .filter_map(|&m| {
            let sel: Vec<&SegmentationRow> = rows.iter().filter(|r| r.mask == m).collect();
            let n = sel.len() as f64;
            (!sel.is_empty()).then(|| SegmentationMean {
                mask: m.to_string(),
                dice: sel.iter().map(|r| r.dice).sum::<f64>() / n,
                jaccard: sel.iter().map(|r| r.jaccard).sum::<f64>() / n,
                pixel_accuracy: sel.iter().map(|r| r.pixel_accuracy).sum::<f64>() / n,
            })
        })
        .collect()
}

fn scene_dirs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        if e.file_type()?.is_dir() {
            names.push(e.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

const MASK_NAMES: [&str; 3] = ["tooth", "bone", "cej"];

fn read_masks(dir: &Path) -> Result<Option<[Mask; 3]>> {
    if !MASK_NAMES.iter().all(|m| dir.join(format!("{m}.png")).exists()) {
        return Ok(None);
    }
    let [t, b, c] = MASK_NAMES.map(|m| io::read_mask(dir.join(format!("{m}.png"))));
    Ok(Some([t?, b?, c?]))
}

/// Evaluates a prediction directory against a phantom truth directory.
///
/// Both hold one sub-directory per scene. A prediction scene provides either
/// `report.json` or the three mask PNGs, which are then analyzed with `model`
/// and `opts`. Truth scenes hold `truth.json` and optionally the reference
/// masks, which enable the segmentation table when the prediction also has
/// masks.
pub fn evaluate_dirs(
    pred_dir: &Path,
    truth_dir: &Path,
    raters: Option<&RaterTable>,
    model: Option<&ModelGraph>,
    opts: &AnalyzeOptions,
) -> Result<EvalBundle> {
    let mut truths = BTreeMap::new();
    let mut truth_masks = BTreeMap::new();
    for scene in scene_dirs(truth_dir)? {
        let dir = truth_dir.join(&scene);
        if dir.join("truth.json").exists() {
            truths.insert(scene.clone(), read_truth(&dir.join("truth.json"))?);
            if let Some(m) = read_masks(&dir)? {
                truth_masks.insert(scene, m);
            }
        }
    }
    let mut preds = BTreeMap::new();
    let mut segmentation = Vec::new();
    for scene in scene_dirs(pred_dir)? {
        let dir = pred_dir.join(&scene);
        let masks = read_masks(&dir)?;
        let report_path = dir.join("report.json");
        let report = if report_path.exists() {
            Some(StageReport::from_json(&std::fs::read_to_string(&report_path)?)?)
        } else if let Some([t, b, c]) = &masks {
            Some(analyze(t, b, c, model, opts)?)
        } else {
            None
        };
        if let Some(r) = report {
            preds.insert(scene.clone(), r);
        }
        if let (Some(p), Some(t)) = (&masks, truth_masks.get(&scene)) {
            for k in 0..3 {
                segmentation.push(segmentation_row(&scene, MASK_NAMES[k], &p[k], &t[k])?);
            }
        }
    }
    let mut bundle = evaluate(&preds, &truths, raters)?;
    bundle.segmentation_mean = segmentation_means(&segmentation);
    bundle.segmentation = segmentation;
    Ok(bundle)
}
