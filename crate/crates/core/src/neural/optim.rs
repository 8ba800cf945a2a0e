use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ModelGraph, Mode};
use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// Pixelwise binary cross-entropy of a probability map against a target.
pub fn bce_loss(tape: &mut Tape, pred: Var, target: &Tensor) -> Result<Var> {
    tape.bce(pred, target)
}

/// Categorical cross-entropy of probability rows against class indices.
pub fn cce_loss(tape: &mut Tape, probs: Var, classes: &[usize]) -> Result<Var> {
    tape.cce(probs, classes)
}

/// Sum of three segmentation losses and one classification loss.
pub fn total_loss(tape: &mut Tape, seg: [Var; 3], cls: Var) -> Result<Var> {
    for (i, v) in seg.iter().chain([&cls]).enumerate() {
        let t = tape.value(*v);
        if t.len() != 1 {
            return Err(Error::input(format!("loss term {i} is not a scalar")));
        }
        if !t.item().is_finite() {
            return Err(Error::Numeric(format!("loss term {i} = {}", t.item())));
        }
    }
    let a = tape.add(seg[0], seg[1])?;
    let b = tape.add(a, seg[2])?;
    tape.add(b, cls)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 8,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so a run can act as a fixed-model baseline.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::param("Adam needs betas in [0, 1) and eps > 0"));
        }
        Ok(())
    }
}

/// Adam moments and timestep for one model's parameter list.
#[derive(Debug, Clone)]
pub struct Adam {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &[&Tensor], cfg: &TrainConfig) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    pub fn for_model(model: &ModelGraph, cfg: &TrainConfig) -> Self {
        Self::new(&model.params(), cfg)
    }

    /// One bias-corrected update. Nothing is modified when any gradient is
    /// non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[String]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::input(format!(
                "{} parameters, {} gradients, optimizer holds {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("param{i}"));
                return Err(Error::Numeric(format!("gradient of {name}")));
            }
            if g.shape != params[i].shape {
                return Err(Error::input(format!("gradient {i} has shape {:?}, parameter {:?}", g.shape, params[i].shape)));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for j in 0..g.len() {
                let gj = g.data[j];
                m.data[j] = self.beta1 * m.data[j] + (1.0 - self.beta1) * gj;
                v.data[j] = self.beta2 * v.data[j] + (1.0 - self.beta2) * gj * gj;
                let mh = m.data[j] / bc1;
                let vh = v.data[j] / bc2;
                p.data[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One `[1, H, W]` target map per input, scored with BCE.
    Masks(Vec<Tensor>),
    /// One class index per input, scored with CCE.
    Classes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Per-sample tensors without the batch axis.
    pub inputs: Vec<Tensor>,
    pub targets: Targets,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = match &self.targets {
            Targets::Masks(m) => m.len(),
            Targets::Classes(c) => c.len(),
        };
        if self.inputs.is_empty() {
            return Err(Error::input("dataset is empty"));
        }
        if n != self.inputs.len() {
            return Err(Error::input(format!("{} inputs but {n} targets", self.inputs.len())));
        }
        Ok(())
    }

    /// Loss of one batch given as sample indices, recorded on `tape`.
    pub fn batch_loss(&self, model: &ModelGraph, tape: &mut Tape, params: &[Var], idx: &[usize], mode: Mode) -> Result<(Var, Var)> {
        let xs: Vec<&Tensor> = idx.iter().map(|&i| &self.inputs[i]).collect();
        let x = tape.leaf(Tensor::stack(&xs)?);
        let out = model.forward(tape, params, x, mode)?;
        let loss = match &self.targets {
            Targets::Masks(m) => {
                let ys: Vec<&Tensor> = idx.iter().map(|&i| &m[i]).collect();
                tape.bce(out, &Tensor::stack(&ys)?)?
            }
            Targets::Classes(c) => {
                let ys: Vec<usize> = idx.iter().map(|&i| c[i]).collect();
                tape.cce(out, &ys)?
            }
        };
        Ok((out, loss))
    }
}

fn with_context(e: Error, epoch: usize, batch: usize) -> Error {
    Error::Training {
        context: format!("epoch {epoch}, batch {batch}"),
        source: Box::new(e),
    }
}

/// Mini-batch Adam training with a seeded shuffle per epoch. Returns the
/// per-epoch mean loss (batch losses weighted by batch size).
pub fn train(model: &mut ModelGraph, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    data.validate()?;
    let names = model.param_names();
    let mut adam = Adam::for_model(model, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mode = Mode::Train {
                dropout_seed: cfg.seed ^ ((epoch as u64) << 32 | b as u64).wrapping_mul(0x2545_F491_4F6C_DD1D),
            };
            let mut step = || -> Result<f64> {
                let mut tape = Tape::new();
                let params = model.bind(&mut tape);
                let (_, loss) = data.batch_loss(model, &mut tape, &params, idx, mode)?;
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::Numeric(format!("batch loss = {value}")));
                }
                let grads = tape.backward(loss)?;
                let g = model.collect_grads(&grads, &params);
                adam.step(&mut model.params_mut(), &g, &names)?;
                Ok(value)
            };
            let value = step().map_err(|e| with_context(e, epoch, b))?;
            total += value * idx.len() as f64;
        }
        curve.push(total / data.len() as f64);
    }
    Ok(curve)
}

/// Writes `epoch,mean_loss` rows.
pub fn write_loss_curve(curve: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mean_loss"])?;
    for (i, v) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = Vec::new();
    writeln!(out, "epoch,mean_loss").expect("write to Vec");
    for (i, v) in curve.iter().enumerate() {
        writeln!(out, "{},{v}", i + 1).expect("write to Vec");
    }
    String::from_utf8(out).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::ModelBuilder;

    fn cfg() -> TrainConfig {
        TrainConfig::default()
    }

    #[test]
    fn adam_first_step_value() {
        let mut p = Tensor::scalar(0.0);
        let mut adam = Adam::new(&[&p], &cfg());
        adam.step(&mut [&mut p], &[Tensor::scalar(1.0)], &[]).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert!((p.item() + 0.000_999_999).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let before = p.clone();
        let mut adam = Adam::new(&[&p], &cfg());
        adam.step(&mut [&mut p], &[Tensor::zeros(&[3])], &[]).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn adam_two_equal_steps_move_equally() {
        let mut p = Tensor::scalar(0.0);
        let mut adam = Adam::new(&[&p], &cfg());
        adam.step(&mut [&mut p], &[Tensor::scalar(1.0)], &[]).unwrap();
        let d1 = p.item().abs();
        adam.step(&mut [&mut p], &[Tensor::scalar(1.0)], &[]).unwrap();
        let d2 = (p.item().abs() - d1).abs();
        assert!((d1 - d2).abs() / d1 < 0.01);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = Tensor::scalar(0.0);
        let mut adam = Adam::new(&[&p], &cfg());
        let err = adam
            .step(&mut [&mut p], &[Tensor::scalar(f64::NAN)], &["layer2.bias".into()])
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("layer2.bias")));
        assert_eq!(p.item(), 0.0);
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn total_loss_is_exact_sum() {
        let mut t = Tape::new();
        let v: Vec<Var> = [0.1, 0.2, 0.3, 0.4].iter().map(|&x| t.leaf(Tensor::scalar(x))).collect();
        let s = total_loss(&mut t, [v[0], v[1], v[2]], v[3]).unwrap();
        assert!((t.value(s).item() - 1.0).abs() < 1e-15);
        let z: Vec<Var> = (0..4).map(|_| t.leaf(Tensor::scalar(0.0))).collect();
        let s = total_loss(&mut t, [z[0], z[1], z[2]], z[3]).unwrap();
        assert_eq!(t.value(s).item(), 0.0);
        let bad = t.leaf(Tensor::scalar(f64::INFINITY));
        assert!(matches!(total_loss(&mut t, [z[0], z[1], bad], z[3]), Err(Error::Numeric(_))));
    }

    fn toy_data() -> (ModelGraph, Dataset) {
        let mut b = ModelBuilder::new(&[2], 5);
        b.dense(3).softmax();
        let model = b.build().unwrap();
        let inputs: Vec<Tensor> = (0..30)
            .map(|i| Tensor::new(vec![2], vec![(i % 3) as f64, 1.0 - (i % 3) as f64 * 0.5]).unwrap())
            .collect();
        let classes = (0..30).map(|i| i % 3).collect();
        (
            model,
            Dataset {
                inputs,
                targets: Targets::Classes(classes),
            },
        )
    }

    #[test]
    fn zero_learning_rate_gives_flat_curve() {
        let (mut model, data) = toy_data();
        let c = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            ..cfg()
        };
        let curve = train(&mut model, &data, &c).unwrap();
        assert_eq!(curve.len(), 4);
        assert!(curve.iter().all(|&v| (v - curve[0]).abs() < 1e-12));
    }

    #[test]
    fn training_is_reproducible_and_learns() {
        let (model, data) = toy_data();
        let c = TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            ..cfg()
        };
        let (mut a, mut b) = (model.clone(), model);
        let ca = train(&mut a, &data, &c).unwrap();
        let cb = train(&mut b, &data, &c).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a, b);
        assert!(ca.last().unwrap() < &(ca[0] * 0.5));
    }

    #[test]
    fn errors_carry_batch_context() {
        let (mut model, mut data) = toy_data();
        data.inputs[4] = Tensor::new(vec![2], vec![f64::NAN, 0.0]).unwrap();
        let err = train(&mut model, &data, &TrainConfig { epochs: 1, ..cfg() }).unwrap_err();
        assert!(matches!(err, Error::Training { ref context, .. } if context.starts_with("epoch 0")));
    }

    #[test]
    fn curve_csv_layout() {
        let s = loss_curve_csv(&[0.5, 0.25]);
        assert_eq!(s, "epoch,mean_loss\n1,0.5\n2,0.25\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        write_loss_curve(&[0.5, 0.25], &p).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), s);
    }
}
