use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// Kernel sizes accepted by [`Layer::Conv2d`].
pub const KERNEL_SIZES: [usize; 4] = [2, 3, 5, 7];

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        pad_before: usize,
        pad_after: usize,
        weight: Tensor,
        bias: Tensor,
    },
    MaxPool2,
    Upsample2,
    /// Concatenates the output of layer `source` ahead of the current channels.
    ConcatSkip {
        source: usize,
    },
    Relu,
    Sigmoid,
    GlobalAvgPool,
    Dropout {
        rate: f64,
    },
    Dense {
        in_features: usize,
        out_features: usize,
        weight: Tensor,
        bias: Tensor,
    },
    Softmax,
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool2 => "maxpool2",
            Layer::Upsample2 => "upsample2",
            Layer::ConcatSkip { .. } => "concat_skip",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::GlobalAvgPool => "global_avg_pool",
            Layer::Dropout { .. } => "dropout",
            Layer::Dense { .. } => "dense",
            Layer::Softmax => "softmax",
        }
    }

    fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }
}

/// Forward-pass behaviour of dropout layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

/// Ordered layers with optional skip edges, plus the per-sample input shape.
///
/// `input` is `[channels, height, width]` for image models or `[features]`
/// for dense-only models; a zero entry accepts any size on that axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub input: Vec<usize>,
    pub layers: Vec<Layer>,
}

fn layer_name(i: usize, l: &Layer) -> String {
    format!("layer{i}:{}", l.kind_name())
}

impl ModelGraph {
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Parameter tensors in declaration order (weight then bias per layer).
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Names matching [`ModelGraph::params`], e.g. `layer3.weight`.
    pub fn param_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.params().is_some())
            .flat_map(|(i, _)| [format!("layer{i}.weight"), format!("layer{i}.bias")])
            .collect()
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Dropout { .. }))
    }

    /// Records every parameter on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Gradients for the vars returned by [`ModelGraph::bind`].
    pub fn collect_grads(&self, grads: &Gradients, params: &[Var]) -> Vec<Tensor> {
        params.iter().map(|&v| grads.wrt(v)).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let ok = x.shape.len() == self.input.len() + 1
            && x.shape[0] > 0
            && self
                .input
                .iter()
                .zip(&x.shape[1..])
                .all(|(&want, &got)| want == 0 || want == got);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape {
                layer: "input".into(),
                message: format!(
                    "expected batch of {:?} (0 = any), got {:?}",
                    self.input, x.shape
                ),
            })
        }
    }

    /// Taped forward pass over a batch `x` (leading axis is the batch).
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var, mode: Mode) -> Result<Var> {
        self.check_input(tape.value(x))?;
        if params.len() != 2 * self.layers.iter().filter(|l| l.params().is_some()).count() {
            return Err(Error::InvalidModel(format!(
                "{} parameter vars bound for {} parameter tensors",
                params.len(),
                self.params().len()
            )));
        }
        let mut outputs: Vec<Var> = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        let mut p = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let name = layer_name(i, layer);
            cur = match layer {
                Layer::Conv2d {
                    stride,
                    pad_before,
                    pad_after,
                    ..
                } => {
                    let v = tape.conv2d(cur, params[p], params[p + 1], *stride, (*pad_before, *pad_after), &name)?;
                    p += 2;
                    v
                }
                Layer::Dense { .. } => {
                    let v = tape.dense(cur, params[p], params[p + 1], &name)?;
                    p += 2;
                    v
                }
                Layer::MaxPool2 => tape.max_pool2(cur, &name)?,
                Layer::Upsample2 => tape.upsample2(cur, &name)?,
                Layer::ConcatSkip { source } => {
                    let src = *outputs.get(*source).ok_or_else(|| {
                        Error::InvalidModel(format!("{name} refers to later layer {source}"))
                    })?;
                    tape.concat(src, cur, &name)?
                }
                Layer::Relu => tape.relu(cur),
                Layer::Sigmoid => tape.sigmoid(cur),
                Layer::GlobalAvgPool => tape.global_avg_pool(cur, &name)?,
                Layer::Dropout { rate } => match mode {
                    Mode::Eval => cur,
                    Mode::Train { dropout_seed } => {
                        let keep = 1.0 - rate;
                        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        let mask = (0..tape.value(cur).len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        tape.dropout(cur, mask)
                    }
                },
                Layer::Softmax => tape.softmax(cur, &name)?,
            };
            outputs.push(cur);
        }
        Ok(cur)
    }

    /// Untaped inference in [`Mode::Eval`].
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let xv = tape.leaf(x.clone());
        let out = self.forward(&mut tape, &params, xv, Mode::Eval)?;
        Ok(tape.value(out).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Feature {
    /// Channels and resolution level (pools minus upsamples).
    Map { ch: usize, level: i32 },
    Flat(usize),
}

/// Incremental construction of a [`ModelGraph`] with seeded He-uniform
/// parameter initialisation. The first error is kept and returned by
/// [`ModelBuilder::build`].
#[derive(Debug)]
pub struct ModelBuilder {
    input: Vec<usize>,
    layers: Vec<Layer>,
    feats: Vec<Feature>,
    cur: Feature,
    rng: ChaCha8Rng,
    error: Option<Error>,
}

impl ModelBuilder {
    pub fn new(input: &[usize], seed: u64) -> Self {
        let cur = match *input {
            [c, _, _] => Feature::Map { ch: c, level: 0 },
            [f] => Feature::Flat(f),
            _ => Feature::Flat(0),
        };
        let error = (!matches!(input.len(), 1 | 3))
            .then(|| Error::param(format!("input shape must be [c, h, w] or [features], got {input:?}")));
        Self {
            input: input.to_vec(),
            layers: Vec::new(),
            feats: Vec::new(),
            cur,
            rng: ChaCha8Rng::seed_from_u64(seed),
            error,
        }
    }

    /// Index the next layer will get; pass the index of a finished layer to
    /// [`ModelBuilder::concat_skip`].
    pub fn last_index(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    fn fail(&mut self, msg: String) -> &mut Self {
        if self.error.is_none() {
            self.error = Some(Error::param(msg));
        }
        self
    }

    fn push(&mut self, layer: Layer, out: Feature) -> &mut Self {
        self.layers.push(layer);
        self.feats.push(out);
        self.cur = out;
        self
    }

    fn init(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        let bound = (6.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.random_range(-bound..bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    fn map_channels(&mut self, what: &str) -> Option<(usize, i32)> {
        match self.cur {
            Feature::Map { ch, level } => Some((ch, level)),
            Feature::Flat(_) => {
                self.fail(format!("{what} needs a feature map, found flat features"));
                None
            }
        }
    }

    /// Stride-1 convolution with "same" padding.
    pub fn conv(&mut self, out_ch: usize, k: usize) -> &mut Self {
        self.conv_with(out_ch, k, 1, (k.saturating_sub(1)) / 2, k / 2)
    }

    pub fn conv_with(&mut self, out_ch: usize, k: usize, stride: usize, pad_before: usize, pad_after: usize) -> &mut Self {
        if !KERNEL_SIZES.contains(&k) {
            return self.fail(format!("kernel size {k} not in {KERNEL_SIZES:?}"));
        }
        if out_ch == 0 || stride == 0 {
            return self.fail("conv needs positive channels and stride".into());
        }
        let Some((in_ch, level)) = self.map_channels("conv2d") else {
            return self;
        };
        let weight = self.init(&[out_ch, in_ch, k, k], in_ch * k * k);
        let layer = Layer::Conv2d {
            in_ch,
            out_ch,
            k,
            stride,
            pad_before,
            pad_after,
            weight,
            bias: Tensor::zeros(&[out_ch]),
        };
        // strided convs change resolution; encode as a distinct level
        let level = if stride == 1 { level } else { level + 100 * stride as i32 };
        self.push(layer, Feature::Map { ch: out_ch, level })
    }

    pub fn max_pool(&mut self) -> &mut Self {
        let Some((ch, level)) = self.map_channels("maxpool2") else {
            return self;
        };
        self.push(Layer::MaxPool2, Feature::Map { ch, level: level + 1 })
    }

    pub fn upsample(&mut self) -> &mut Self {
        let Some((ch, level)) = self.map_channels("upsample2") else {
            return self;
        };
        self.push(Layer::Upsample2, Feature::Map { ch, level: level - 1 })
    }

    /// Concatenates the output of an earlier layer at the same resolution.
    pub fn concat_skip(&mut self, source: usize) -> &mut Self {
        let Some((ch, level)) = self.map_channels("concat_skip") else {
            return self;
        };
        match self.feats.get(source).copied() {
            Some(Feature::Map { ch: sc, level: sl }) if sl == level => {
                self.push(Layer::ConcatSkip { source }, Feature::Map { ch: ch + sc, level })
            }
            Some(Feature::Map { level: sl, .. }) => self.fail(format!(
                "skip from layer {source} is at resolution level {sl}, decoder at {level}"
            )),
            _ => self.fail(format!("skip source {source} is not an earlier feature map")),
        }
    }

    pub fn relu(&mut self) -> &mut Self {
        let cur = self.cur;
        self.push(Layer::Relu, cur)
    }

    pub fn sigmoid(&mut self) -> &mut Self {
        let cur = self.cur;
        self.push(Layer::Sigmoid, cur)
    }

    pub fn global_avg_pool(&mut self) -> &mut Self {
        let Some((ch, _)) = self.map_channels("global_avg_pool") else {
            return self;
        };
        self.push(Layer::GlobalAvgPool, Feature::Flat(ch))
    }

    pub fn dropout(&mut self, rate: f64) -> &mut Self {
        if !(0.0..1.0).contains(&rate) {
            return self.fail(format!("dropout rate {rate} outside [0, 1)"));
        }
        let cur = self.cur;
        self.push(Layer::Dropout { rate }, cur)
    }

    pub fn dense(&mut self, out_features: usize) -> &mut Self {
        let Feature::Flat(in_features) = self.cur else {
            return self.fail("dense needs flat features; add global_avg_pool first".into());
        };
        if in_features == 0 || out_features == 0 {
            return self.fail("dense needs positive feature counts".into());
        }
        let weight = self.init(&[out_features, in_features], in_features);
        let layer = Layer::Dense {
            in_features,
            out_features,
            weight,
            bias: Tensor::zeros(&[out_features]),
        };
        self.push(layer, Feature::Flat(out_features))
    }

    pub fn softmax(&mut self) -> &mut Self {
        if !matches!(self.cur, Feature::Flat(_)) {
            return self.fail("softmax needs flat features".into());
        }
        let cur = self.cur;
        self.push(Layer::Softmax, cur)
    }

    pub fn build(&mut self) -> Result<ModelGraph> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        Ok(ModelGraph {
            input: self.input.clone(),
            layers: std::mem::take(&mut self.layers),
        })
    }
}

/// Stage classifier: four conv/relu/pool blocks, global average pooling,
/// dropout and two dense layers ending in a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub input_size: usize,
    pub in_channels: usize,
    pub classes: usize,
    pub channels: [usize; 4],
    pub kernel: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            in_channels: 3,
            classes: 3,
            channels: [8, 16, 16, 32],
            kernel: 3,
            hidden: 16,
            dropout: 0.5,
            seed: 7,
        }
    }
}

pub fn build_classifier(cfg: &ClassifierConfig) -> Result<ModelGraph> {
    if cfg.input_size < 16 {
        return Err(Error::param(format!(
            "classifier input {} too small for four 2x pooling stages (minimum 16)",
            cfg.input_size
        )));
    }
    if cfg.classes < 2 {
        return Err(Error::param("classifier needs at least two classes"));
    }
    let mut b = ModelBuilder::new(&[cfg.in_channels, cfg.input_size, cfg.input_size], cfg.seed);
    for &ch in &cfg.channels {
        b.conv(ch, cfg.kernel).relu().max_pool();
    }
    b.global_avg_pool()
        .dropout(cfg.dropout)
        .dense(cfg.hidden)
        .relu()
        .dense(cfg.classes)
        .softmax();
    b.build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub in_channels: usize,
    pub seed: u64,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            base_channels: 8,
            kernel: 5,
            in_channels: 1,
            seed: 11,
        }
    }
}

/// Encoder/decoder segmenter with nearest-neighbour upsampling, a 2x2
/// convolution after each upsample and channel concatenation from the
/// encoder stage of matching resolution. Output is one sigmoid channel.
/// Input height and width must be divisible by `2^depth`.
pub fn build_toy_unet(cfg: &UNetConfig) -> Result<ModelGraph> {
    if !(1..=3).contains(&cfg.depth) {
        return Err(Error::param(format!("U-Net depth {} not in 1..=3", cfg.depth)));
    }
    if !KERNEL_SIZES.contains(&cfg.kernel) {
        return Err(Error::param(format!("kernel size {} not in {KERNEL_SIZES:?}", cfg.kernel)));
    }
    if cfg.base_channels == 0 {
        return Err(Error::param("base_channels must be positive"));
    }
    let ch = |l: usize| cfg.base_channels << l;
    let mut b = ModelBuilder::new(&[cfg.in_channels, 0, 0], cfg.seed);
    let mut skips = Vec::with_capacity(cfg.depth);
    for l in 0..cfg.depth {
        b.conv(ch(l), cfg.kernel).relu();
        skips.push(b.last_index());
        b.max_pool();
    }
    b.conv(ch(cfg.depth), cfg.kernel).relu();
    for l in (0..cfg.depth).rev() {
        b.upsample().conv_with(ch(l), 2, 1, 0, 1).relu();
        b.concat_skip(skips[l]);
        b.conv(ch(l), cfg.kernel).relu();
    }
    b.conv(1, 3).sigmoid();
    b.build()
}
