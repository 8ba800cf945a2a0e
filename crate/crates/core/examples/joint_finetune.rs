//! End-to-end fine-tuning: three toy U-Nets segment tooth, bone and CEJ from
//! a noisy label image, the classifier stages the scene from their stacked
//! outputs, and one combined loss drives all four models.

use perio::neural::{
    build_classifier, build_toy_unet, total_loss, Adam, ClassifierConfig, Mode, ModelGraph, Tape, Tensor,
    TrainConfig, UNetConfig,
};
use perio::phantom::{generate_corpus, CorpusScene, NoiseLevel};
use perio::raster::{overlay, resize, GrayImage};
use perio::Mask;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SIZE: usize = 32;
const BATCH: usize = 4;

fn shrink(m: &Mask) -> perio::Result<Tensor> {
    let g = GrayImage::from_vec(m.width(), m.height(), m.bits().iter().map(|&b| f64::from(u8::from(b))).collect())?;
    let small = resize(&g, SIZE, SIZE)?;
    Tensor::new(vec![1, SIZE, SIZE], small.data().iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect())
}

struct Sample {
    image: Tensor,
    masks: [Tensor; 3],
    stage: usize,
}

fn sample(scene: &CorpusScene, rng: &mut ChaCha8Rng) -> perio::Result<Sample> {
    let r = &scene.render;
    let labels = overlay(&r.tooth, &r.bone, &r.cej)?;
    let (w, h) = (r.tooth.width(), r.tooth.height());
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut g = GrayImage::new(w, h);
    for row in 0..h {
        for col in 0..w {
            g.set(row, col, f64::from(labels.get(row, col)) / 3.0 + noise.sample(rng));
        }
    }
    let small = resize(&g, SIZE, SIZE)?;
    Ok(Sample {
        image: Tensor::new(vec![1, SIZE, SIZE], small.data().to_vec())?,
        masks: [shrink(&r.tooth)?, shrink(&r.bone)?, shrink(&r.cej)?],
        stage: scene.scene_stage().index(),
    })
}

fn main() -> perio::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = generate_corpus(24, 21, NoiseLevel::Clean)?;
    let samples: Vec<Sample> = corpus.iter().map(|s| sample(s, &mut rng)).collect::<perio::Result<_>>()?;

    let unet_cfg = |seed| UNetConfig {
        base_channels: 4,
        kernel: 3,
        seed,
        ..UNetConfig::default()
    };
    let mut models: Vec<ModelGraph> = vec![
        build_toy_unet(&unet_cfg(1))?,
        build_toy_unet(&unet_cfg(2))?,
        build_toy_unet(&unet_cfg(3))?,
        build_classifier(&ClassifierConfig {
            input_size: SIZE,
            hidden: 8,
            ..ClassifierConfig::default()
        })?,
    ];
    let cfg = TrainConfig {
        learning_rate: 0.003,
        ..TrainConfig::default()
    };
    let mut opts: Vec<Adam> = models.iter().map(|m| Adam::for_model(m, &cfg)).collect();

    for epoch in 0..8u64 {
        let mut epoch_loss = 0.0;
        for (b, chunk) in samples.chunks(BATCH).enumerate() {
            let refs = |f: &dyn Fn(&Sample) -> &Tensor| chunk.iter().map(f).collect::<Vec<_>>();
            let x = Tensor::stack(&refs(&|s| &s.image))?;
            let mut tape = Tape::new();
            let params: Vec<_> = models.iter().map(|m| m.bind(&mut tape)).collect();
            let xv = tape.leaf(x);
            let mut seg = Vec::new();
            let mut outs = Vec::new();
            for k in 0..3 {
                let out = models[k].forward(&mut tape, &params[k], xv, Mode::Eval)?;
                let target = Tensor::stack(&refs(&|s| &s.masks[k]))?;
                seg.push(tape.bce(out, &target)?);
                outs.push(out);
            }
            let stacked = tape.concat(outs[0], outs[1], "stack")?;
            let stacked = tape.concat(stacked, outs[2], "stack")?;
            let mode = Mode::Train {
                dropout_seed: epoch * 1000 + b as u64,
            };
            let probs = models[3].forward(&mut tape, &params[3], stacked, mode)?;
            let classes: Vec<usize> = chunk.iter().map(|s| s.stage).collect();
            let cls = tape.cce(probs, &classes)?;
            let loss = total_loss(&mut tape, [seg[0], seg[1], seg[2]], cls)?;
            epoch_loss += tape.value(loss).item();
            let grads = tape.backward(loss)?;
            for (k, m) in models.iter_mut().enumerate() {
                let g = m.collect_grads(&grads, &params[k]);
                let names = m.param_names();
                opts[k].step(&mut m.params_mut(), &g, &names)?;
            }
        }
        println!("epoch {} joint loss {:.4}", epoch + 1, epoch_loss / samples.len().div_ceil(BATCH) as f64);
    }
    Ok(())
}
