//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned as constants.

use std::time::{Duration, Instant};

use http_body_util::BodyExt;
use perio::geometry::{assign_stage, Stage, StageThresholds};
use perio::metrics::{binary_auc, cohens_kappa, dice, jaccard, two_sample_t_test, ConfusionMatrix};
use perio::neural::{
    argmax_stage, build_classifier, build_toy_unet, check_function, gradient_check, total_loss, train, CheckTarget,
    ClassifierConfig, GradCheckReport, Mode, ModelBuilder, ModelGraph, Targets, Tensor, TrainConfig, UNetConfig,
};
use perio::phantom::{generate_corpus, render, NoiseLevel, PhantomScene, PhantomToothSpec};
use perio::pipeline::service::{router, ServiceState};
use perio::pipeline::{
    analyze, balanced_stage_crops, classifier_dataset, overlay_png, shape_segmentation_dataset,
    AnalyzeOptions, StageReport,
};
use perio::raster::{io, overlay, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

const GEOMETRY_SCENES: usize = 200;
const GEOMETRY_SEED: u64 = 2024;
const RBL_TOLERANCE: f64 = 2.0;
const WITHIN_FRACTION: f64 = 0.98;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(30);

const IDENTITY_PAIRS: usize = 1000;
const DICE_JACCARD_TOL: f64 = 1e-12;
const AUC_MAX_SET: usize = 12;

const T_TOL: f64 = 1e-9;
const P_TOL: f64 = 1e-3;

const GRAD_TOL: f64 = 1e-4;
const LINEAR_GRAD_TOL: f64 = 1e-6;
const LINEARITY_TOL: f64 = 1e-8;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

const CLASSIFIER_PER_STAGE: usize = 100;
const CLASSIFIER_EPOCHS: usize = 20;
const CLASSIFIER_MIN_ACC: f64 = 0.90;
const CLASSIFIER_BUDGET: Duration = Duration::from_secs(120);
const UNET_SAMPLES: usize = 200;
const UNET_SIZE: usize = 32;
const UNET_EPOCHS: usize = 30;
const UNET_MIN_DICE: f64 = 0.95;
const UNET_BUDGET: Duration = Duration::from_secs(180);
const TOY_LR: f64 = 0.003;

const DEGRADATION_SCENES: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn smooth_opts() -> AnalyzeOptions {
    AnalyzeOptions::default()
}

fn rule_accuracy(noise: NoiseLevel, scenes: usize, seed: u64) -> (usize, usize) {
    let corpus = generate_corpus(scenes, seed, noise).unwrap();
    let th = StageThresholds::default();
    let (mut n, mut ok) = (0, 0);
    for s in &corpus {
        let r = &s.render;
        let rep = analyze(&r.tooth, &r.bone, &r.cej, None, &smooth_opts()).unwrap();
        for t in &r.truth {
            n += 1;
            let hit = rep
                .teeth
                .iter()
                .find(|p| p.id == t.id)
                .and_then(|p| p.rbl_percent())
                .map(|rbl| assign_stage(rbl, &th).unwrap());
            if hit == Some(t.stage) {
                ok += 1;
            }
        }
    }
    (ok, n)
}

fn geometry_oracle() -> Outcome {
    let start = Instant::now();
    let corpus = generate_corpus(GEOMETRY_SCENES, GEOMETRY_SEED, NoiseLevel::Clean).unwrap();
    let th = StageThresholds::default();
    let (mut n, mut within, mut far, mut far_ok) = (0, 0, 0, 0);
    for s in &corpus {
        let r = &s.render;
        let rep = analyze(&r.tooth, &r.bone, &r.cej, None, &smooth_opts()).unwrap();
        for t in &r.truth {
            n += 1;
            let rbl = rep.teeth.iter().find(|p| p.id == t.id).and_then(|p| p.rbl_percent());
            if rbl.is_some_and(|v| (v - t.rbl_percent).abs() <= RBL_TOLERANCE) {
                within += 1;
            }
            if (t.rbl_percent - th.t1).abs() > RBL_TOLERANCE && (t.rbl_percent - th.t2).abs() > RBL_TOLERANCE {
                far += 1;
                if rbl.map(|v| assign_stage(v, &th).unwrap()) == Some(t.stage) {
                    far_ok += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let frac = within as f64 / n as f64;
    outcome(
        frac >= WITHIN_FRACTION && far_ok == far && elapsed < GEOMETRY_BUDGET,
        format!(
            "{within}/{n} teeth within ±{RBL_TOLERANCE} ({:.1}% vs ≥{:.0}%), stage {far_ok}/{far} away from thresholds, {:.1}s (<{}s)",
            frac * 100.0,
            WITHIN_FRACTION * 100.0,
            elapsed.as_secs_f64(),
            GEOMETRY_BUDGET.as_secs()
        ),
    )
}

fn stage_thresholds() -> Outcome {
    let th = StageThresholds::default();
    let cases = [(10.0, Stage::I), (24.0, Stage::II), (50.0, Stage::III), (15.0, Stage::II), (33.0, Stage::III)];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(r, s)| assign_stage(*r, &th).ok() != Some(*s))
        .map(|(r, s)| format!("{r}->{s}"))
        .collect();
    outcome(bad.is_empty(), format!("10→I 24→II 50→III 15→II 33→III; mismatches: {bad:?}"))
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Mask {
    let p = rng.random_range(0.0..1.0);
    Mask::from_bits(w, h, (0..w * h).map(|_| rng.random_bool(p)).collect()).unwrap()
}

/// Counts positive/negative pairs one by one, ties scoring one half.
fn auc_by_pairs(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_dj = 0.0f64;
    for _ in 0..IDENTITY_PAIRS {
        let (w, h) = (rng.random_range(1..24), rng.random_range(1..24));
        let (a, b) = (random_mask(&mut rng, w, h), random_mask(&mut rng, w, h));
        let (d, j) = (dice(&a, &b).unwrap(), jaccard(&a, &b).unwrap());
        worst_dj = worst_dj.max((d - 2.0 * j / (1.0 + j)).abs());
    }
    let mut kappa_asym = 0.0f64;
    for _ in 0..IDENTITY_PAIRS {
        let counts: Vec<Vec<u64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(0..20)).collect()).collect();
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        if let (Ok(a), Ok(b)) = (cohens_kappa(&cm), cohens_kappa(&cm.transpose())) {
            kappa_asym = kappa_asym.max((a - b).abs());
        }
    }
    // exhaustive over every labelling of small score sets, random scores with ties
    let mut auc_diff = 0.0f64;
    let mut auc_sets = 0usize;
    for n in 2..=AUC_MAX_SET {
        let trials = if n <= 8 { 1 << n } else { 256 };
        for t in 0..trials {
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect();
            let positive: Vec<bool> = if n <= 8 {
                (0..n).map(|i| t >> i & 1 == 1).collect()
            } else {
                (0..n).map(|_| rng.random_bool(0.5)).collect()
            };
            let fast = binary_auc(&scores, &positive);
            let slow = auc_by_pairs(&scores, &positive);
            auc_sets += 1;
            match (fast, slow) {
                (Some(a), Some(b)) => auc_diff = auc_diff.max((a - b).abs()),
                (None, None) => {}
                _ => auc_diff = f64::INFINITY,
            }
        }
    }
    outcome(
        worst_dj <= DICE_JACCARD_TOL && kappa_asym <= 1e-12 && auc_diff <= 1e-12,
        format!(
            "max |dice-2J/(1+J)| {worst_dj:.1e} over {IDENTITY_PAIRS} pairs (≤{DICE_JACCARD_TOL:.0e}), kappa transpose gap {kappa_asym:.1e}, AUC vs pair enumeration gap {auc_diff:.1e} over {auc_sets} sets of size 2..={AUC_MAX_SET}"
        ),
    )
}

fn t_test() -> Outcome {
    let r = two_sample_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let same = two_sample_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    outcome(
        (r.t + 1.0).abs() < T_TOL && r.df == 8.0 && (r.p - 0.3466).abs() <= P_TOL && same.p == 1.0,
        format!("t={:.6} df={} p={:.5} (0.3466 ±{P_TOL}), identical samples p={}", r.t, r.df, r.p, same.p),
    )
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn model(input: &[usize], f: impl FnOnce(&mut ModelBuilder)) -> ModelGraph {
    let mut b = ModelBuilder::new(input, 3);
    f(&mut b);
    b.build().unwrap()
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut results: Vec<(String, GradCheckReport)> = Vec::new();
    let mut run = |name: &str, m: &ModelGraph, x_shape: &[usize], target: Option<CheckTarget>, tol: f64, rng: &mut ChaCha8Rng| {
        // zero-initialised biases behind a dead ReLU sit exactly on the kink
        let mut m = m.clone();
        let names = m.param_names();
        for (n, p) in names.iter().zip(m.params_mut()) {
            if n.ends_with(".bias") {
                p.data.iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
            }
        }
        let m = &m;
        let x = random_tensor(rng, x_shape);
        let target = target.unwrap_or_else(|| {
            let out = m.predict(&x).unwrap();
            CheckTarget::Weighted(random_tensor(rng, &out.shape))
        });
        let r = gradient_check(m, &x, &target, tol, Mode::Eval).unwrap();
        results.push((name.to_string(), r));
    };
    let img = [2usize, 6, 6];
    let xs = [2usize, 2, 6, 6];
    for k in [2, 3, 5, 7] {
        run(&format!("conv{k}x{k}"), &model(&img, |b| { b.conv(3, k); }), &xs, None, LINEAR_GRAD_TOL, &mut rng);
    }
    run("conv stride 2", &model(&img, |b| { b.conv_with(3, 3, 2, 1, 1); }), &xs, None, LINEAR_GRAD_TOL, &mut rng);
    run("maxpool2", &model(&img, |b| { b.conv(2, 3).max_pool(); }), &xs, None, GRAD_TOL, &mut rng);
    run("upsample2", &model(&img, |b| { b.conv(2, 3).upsample(); }), &xs, None, LINEAR_GRAD_TOL, &mut rng);
    run("concat_skip", &model(&img, |b| { b.conv(2, 3).conv(3, 3).concat_skip(0); }), &xs, None, LINEAR_GRAD_TOL, &mut rng);
    run("relu", &model(&img, |b| { b.conv(2, 3).relu(); }), &xs, None, GRAD_TOL, &mut rng);
    run("sigmoid", &model(&img, |b| { b.conv(2, 3).sigmoid(); }), &xs, None, GRAD_TOL, &mut rng);
    run("global_avg_pool", &model(&img, |b| { b.conv(3, 3).global_avg_pool().dense(2); }), &xs, None, LINEAR_GRAD_TOL, &mut rng);
    run("dense", &model(&[5], |b| { b.dense(4).dense(3); }), &[3, 5], None, LINEAR_GRAD_TOL, &mut rng);
    run("softmax", &model(&[5], |b| { b.dense(3).softmax(); }), &[3, 5], None, GRAD_TOL, &mut rng);
    let mask_t = Tensor::new(vec![2, 2, 6, 6], (0..144).map(|i| f64::from(u8::from(i % 5 < 2))).collect()).unwrap();
    run("bce", &model(&img, |b| { b.conv(2, 3).sigmoid(); }), &xs, Some(CheckTarget::Masks(mask_t)), GRAD_TOL, &mut rng);
    run("cce", &model(&[5], |b| { b.dense(3).softmax(); }), &[3, 5], Some(CheckTarget::Classes(vec![0, 2, 1])), GRAD_TOL, &mut rng);
    let cls = build_classifier(&ClassifierConfig {
        input_size: 16,
        channels: [2, 3, 3, 4],
        hidden: 4,
        ..ClassifierConfig::default()
    })
    .unwrap();
    run("classifier+cce", &cls, &[2, 3, 16, 16], Some(CheckTarget::Classes(vec![1, 2])), GRAD_TOL, &mut rng);
    let unet = build_toy_unet(&UNetConfig {
        depth: 2,
        base_channels: 2,
        kernel: 3,
        in_channels: 1,
        seed: 2,
    })
    .unwrap();
    let unet_t = Tensor::new(vec![1, 1, 8, 8], (0..64).map(|i| f64::from(u8::from(i % 7 < 3))).collect()).unwrap();
    run("unet+bce", &unet, &[1, 1, 8, 8], Some(CheckTarget::Masks(unet_t)), GRAD_TOL, &mut rng);

    // dropout with a fixed mask is linear in its input
    let x = random_tensor(&mut rng, &[2, 6]);
    let w = random_tensor(&mut rng, &[2, 6]);
    let mask: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 0.0 } else { 1.5 }).collect();
    let r = check_function(&["x"], &[x], LINEAR_GRAD_TOL, |tape, v| {
        let d = tape.dropout(v[0], mask.clone());
        tape.weighted_sum(d, &w)
    })
    .unwrap();
    results.push(("dropout".into(), r));

    // total loss over a shared parameter: three segmentation heads and a classifier head
    let shared = random_tensor(&mut rng, &[2, 1, 3, 3]);
    let bias = Tensor::zeros(&[2]);
    let x = random_tensor(&mut rng, &[1, 1, 6, 6]);
    let targets: Vec<Tensor> = (0..3)
        .map(|k| Tensor::new(vec![1, 2, 6, 6], (0..72).map(|i| f64::from(u8::from((i + k) % 4 == 0))).collect()).unwrap())
        .collect();
    let dw = random_tensor(&mut rng, &[3, 2]);
    let db = Tensor::zeros(&[3]);
    let heads = |tape: &mut perio::neural::Tape, v: &[perio::neural::Var]| {
        let h = tape.conv2d(v[2], v[0], v[1], 1, (1, 1), "shared").unwrap();
        let s = tape.sigmoid(h);
        let seg: Vec<perio::neural::Var> = targets.iter().map(|t| tape.bce(s, t).unwrap()).collect();
        let g = tape.global_avg_pool(h, "gap").unwrap();
        let d = tape.dense(g, v[3], v[4], "dense").unwrap();
        let p = tape.softmax(d, "softmax").unwrap();
        let c = tape.cce(p, &[1]).unwrap();
        (seg, c)
    };
    let inputs = vec![shared.clone(), bias.clone(), x.clone(), dw.clone(), db.clone()];
    let r = check_function(&["shared.weight", "shared.bias", "x", "dense.weight", "dense.bias"], &inputs, GRAD_TOL, |tape, v| {
        let (seg, c) = heads(tape, v);
        total_loss(tape, [seg[0], seg[1], seg[2]], c)
    })
    .unwrap();
    results.push(("total_loss".into(), r));

    // linearity: gradient of the sum equals the sum of per-term gradients
    let grad_of = |which: Option<usize>| -> Tensor {
        let mut tape = perio::neural::Tape::new();
        let v: Vec<perio::neural::Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let (seg, c) = heads(&mut tape, &v);
        let terms = [seg[0], seg[1], seg[2], c];
        let loss = match which {
            Some(i) => terms[i],
            None => total_loss(&mut tape, [seg[0], seg[1], seg[2]], c).unwrap(),
        };
        tape.backward(loss).unwrap().wrt(v[0])
    };
    let total = grad_of(None);
    let mut summed = Tensor::zeros(&total.shape);
    for i in 0..4 {
        summed.add_assign(&grad_of(Some(i)));
    }
    let linearity = total.data.iter().zip(&summed.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let elapsed = start.elapsed();
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| !r.passed)
        .map(|(n, r)| format!("{n} ({:.1e} ≥ {:.0e})", r.max_rel_error, r.tolerance))
        .collect();
    let worst_lin = results
        .iter()
        .filter(|(_, r)| r.tolerance == LINEAR_GRAD_TOL)
        .map(|(_, r)| r.max_rel_error)
        .fold(0.0, f64::max);
    let worst = results.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    outcome(
        failed.is_empty() && linearity <= LINEARITY_TOL && elapsed < GRAD_BUDGET,
        format!(
            "{} checks, worst rel err {worst:.1e} (<{GRAD_TOL:.0e}), linear worst {worst_lin:.1e} (<{LINEAR_GRAD_TOL:.0e}), total-loss linearity {linearity:.1e}, {:.1}s (<{}s){}",
            results.len(),
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs(),
            if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
        ),
    )
}

fn classifier_accuracy(m: &ModelGraph, xs: &[Tensor], ys: &[Stage]) -> f64 {
    let hits = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| {
            let p = m.predict(&Tensor::stack(&[x]).unwrap()).unwrap();
            argmax_stage(&p.data).unwrap() == **y
        })
        .count();
    hits as f64 / ys.len() as f64
}

fn unet_dice(m: &ModelGraph, data: &perio::neural::Dataset) -> f64 {
    let Targets::Masks(ys) = &data.targets else { unreachable!() };
    let mut total = 0.0;
    for (x, y) in data.inputs.iter().zip(ys) {
        let p = m.predict(&Tensor::stack(&[x]).unwrap()).unwrap();
        let pm = Mask::from_bits(UNET_SIZE, UNET_SIZE, p.data.iter().map(|&v| v > 0.5).collect()).unwrap();
        let ym = Mask::from_bits(UNET_SIZE, UNET_SIZE, y.data.iter().map(|&v| v > 0.5).collect()).unwrap();
        total += dice(&pm, &ym).unwrap();
    }
    total / ys.len() as f64
}

fn toy_training() -> Outcome {
    let start = Instant::now();
    let (xtr, ytr) = balanced_stage_crops(CLASSIFIER_PER_STAGE, 64, 1, NoiseLevel::Clean).unwrap();
    let (xte, yte) = balanced_stage_crops(CLASSIFIER_PER_STAGE, 64, 99_991, NoiseLevel::Clean).unwrap();
    let mut cls = build_classifier(&ClassifierConfig::default()).unwrap();
    let cfg = TrainConfig {
        learning_rate: TOY_LR,
        epochs: CLASSIFIER_EPOCHS,
        seed: 3,
        ..TrainConfig::default()
    };
    let train_set = classifier_dataset(xtr, &ytr);
    train(&mut cls, &train_set, &cfg).unwrap();
    let acc = classifier_accuracy(&cls, &xte, &yte);
    let cls_time = start.elapsed();

    let start = Instant::now();
    let seg = shape_segmentation_dataset(UNET_SAMPLES, UNET_SIZE, 5);
    let ucfg = UNetConfig {
        depth: 2,
        base_channels: 4,
        kernel: 3,
        in_channels: 1,
        seed: 11,
    };
    let tcfg = TrainConfig {
        learning_rate: TOY_LR,
        epochs: UNET_EPOCHS,
        seed: 1,
        ..TrainConfig::default()
    };
    let mut unet = build_toy_unet(&ucfg).unwrap();
    let curve = train(&mut unet, &seg, &tcfg).unwrap();
    let d = unet_dice(&unet, &seg);
    let unet_time = start.elapsed();

    // bit-reproducibility: a second identical run
    let mut again = build_toy_unet(&ucfg).unwrap();
    let curve2 = train(&mut again, &seg, &tcfg).unwrap();
    let short = TrainConfig {
        epochs: 1,
        ..cfg.clone()
    };
    let subset = perio::neural::Dataset {
        inputs: train_set.inputs[..24].to_vec(),
        targets: match &train_set.targets {
            Targets::Classes(c) => Targets::Classes(c[..24].to_vec()),
            Targets::Masks(_) => unreachable!(),
        },
    };
    let cls_runs: Vec<(ModelGraph, Vec<f64>)> = (0..2)
        .map(|_| {
            let mut m = build_classifier(&ClassifierConfig::default()).unwrap();
            let c = train(&mut m, &subset, &short).unwrap();
            (m, c)
        })
        .collect();
    let reproducible = curve == curve2 && again == unet && cls_runs[0] == cls_runs[1];

    outcome(
        acc >= CLASSIFIER_MIN_ACC
            && cls_time < CLASSIFIER_BUDGET
            && d >= UNET_MIN_DICE
            && unet_time < UNET_BUDGET
            && reproducible,
        format!(
            "classifier test accuracy {:.1}% on {} balanced crops (≥{:.0}%) after {CLASSIFIER_EPOCHS} epochs in {:.1}s (<{}s); U-Net training Dice {d:.4} (≥{UNET_MIN_DICE}) on {UNET_SAMPLES} masks after {UNET_EPOCHS} epochs in {:.1}s (<{}s); reproducible {reproducible}",
            acc * 100.0,
            yte.len(),
            CLASSIFIER_MIN_ACC * 100.0,
            cls_time.as_secs_f64(),
            CLASSIFIER_BUDGET.as_secs(),
            unet_time.as_secs_f64(),
            UNET_BUDGET.as_secs()
        ),
    )
}

fn degradation() -> Outcome {
    let (ok0, n0) = rule_accuracy(NoiseLevel::Clean, DEGRADATION_SCENES, 77);
    let (ok2, n2) = rule_accuracy(NoiseLevel::Heavy, DEGRADATION_SCENES, 77);
    let (a0, a2) = (ok0 as f64 / n0 as f64, ok2 as f64 / n2 as f64);
    outcome(
        a2 < a0,
        format!("rule stage accuracy noise 2: {ok2}/{n2} = {a2:.3} < noise 0: {ok0}/{n0} = {a0:.3}"),
    )
}

fn fixture() -> PhantomScene {
    PhantomScene::new(
        240,
        180,
        vec![
            PhantomToothSpec::upright(60.0, 60.0, 30.0, 90.0).with_bone(8.0, 10.0),
            PhantomToothSpec::upright(125.0, 62.0, 40.0, 92.0).with_bone(22.0, 18.0).with_roots(2).with_tilt(5.0),
            PhantomToothSpec::upright(190.0, 60.0, 30.0, 88.0).with_bone(40.0, 36.0).with_tilt(-6.0),
        ],
    )
}

fn pipeline_round_trip() -> Outcome {
    let r = render(&fixture()).unwrap();
    let opts = AnalyzeOptions::default();
    let a = analyze(&r.tooth, &r.bone, &r.cej, None, &opts).unwrap().to_json().unwrap();
    let b = analyze(&r.tooth, &r.bone, &r.cej, None, &opts).unwrap().to_json().unwrap();
    let parsed = StageReport::from_json(&a).unwrap();
    let round = parsed.to_json().unwrap() == a && StageReport::from_json(&parsed.to_json().unwrap()).unwrap() == parsed;
    let png = overlay_png(&r.tooth, &r.bone, &r.cej).unwrap();
    let decoded = io::decode_overlay(&png).unwrap();
    let same_overlay = decoded == overlay(&r.tooth, &r.bone, &r.cej).unwrap();
    let stages_ok = parsed.teeth.iter().zip(&r.truth).all(|(t, tr)| t.stage_rule == Some(tr.stage));
    outcome(
        a == b && round && same_overlay && stages_ok,
        format!(
            "byte-identical JSON {} ({} bytes), round-trip {round}, overlay PNG decodes to label raster {same_overlay}",
            a == b,
            a.len()
        ),
    )
}

fn multipart(fields: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "acceptance-boundary";
    let mut body = Vec::new();
    for (name, data) in fields {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}.png\"\r\nContent-Type: image/png\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

async fn call(app: &axum::Router, req: axum::http::Request<axum::body::Body>) -> (u16, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn service_flow() -> Outcome {
    use axum::body::Body;
    use axum::http::Request;
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let app = router(ServiceState::new(None));
        let r = render(&fixture()).unwrap();
        let enc = |m: &Mask| io::encode_mask(m).unwrap();
        let (t, b, c) = (enc(&r.tooth), enc(&r.bone), enc(&r.cej));
        let (ct, body) = multipart(&[("tooth", &t), ("bone", &b), ("cej", &c)]);
        let req = Request::post("/api/analyze").header("content-type", ct).body(Body::from(body)).unwrap();
        let (s1, body) = call(&app, req).await;
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        let id = v["id"].as_str().unwrap_or_default().to_string();
        let analyzed: StageReport = serde_json::from_value(v["report"].clone()).unwrap();
        let stages_ok = analyzed.teeth.iter().zip(&r.truth).all(|(t, tr)| t.stage_rule == Some(tr.stage));

        let (s2, body) = call(&app, Request::get(format!("/api/report/{id}")).body(Body::empty()).unwrap()).await;
        let fetched: StageReport = serde_json::from_slice(&body).unwrap();

        let req = Request::post(format!("/api/restage/{id}"))
            .header("content-type", "application/json")
            .body(Body::from(r#"{"t1": 5.0, "t2": 10.0}"#))
            .unwrap();
        let (s3, body) = call(&app, req).await;
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        let restaged: StageReport = serde_json::from_value(v["report"].clone()).unwrap();
        let rbl_same = restaged.teeth.iter().zip(&analyzed.teeth).all(|(a, b)| a.rbl_percent() == b.rbl_percent());
        let all_three = restaged.teeth.iter().all(|t| t.stage_rule == Some(Stage::III));

        let (s4, png) = call(&app, Request::get(format!("/api/overlay/{id}.png")).body(Body::empty()).unwrap()).await;
        let overlay_ok = io::decode_overlay(&png).ok() == Some(overlay(&r.tooth, &r.bone, &r.cej).unwrap());
        let (s5, _) = call(&app, Request::get("/api/report/unknown").body(Body::empty()).unwrap()).await;

        let ok = (s1, s2, s3, s4, s5) == (200, 200, 200, 200, 404)
            && stages_ok
            && fetched == analyzed
            && rbl_same
            && all_three
            && overlay_ok;
        outcome(
            ok,
            format!(
                "analyze {s1}, report {s2}, restage {s3} (RBL unchanged {rbl_same}), overlay {s4} (labels match {overlay_ok}), unknown id {s5}; stages match truth {stages_ok}"
            ),
        )
    })
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this target
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("geometry oracle", geometry_oracle),
        ("stage thresholds", stage_thresholds),
        ("metric identities", metric_identities),
        ("t-test", t_test),
        ("gradient checks", gradient_checks),
        ("toy training", toy_training),
        ("noise degradation", degradation),
        ("pipeline determinism and round-trip", pipeline_round_trip),
        ("service integration", service_flow),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!("{} [{}/9] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
