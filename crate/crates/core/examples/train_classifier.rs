//! Trains the stage classifier on heatmap crops of phantom teeth and reports
//! held-out accuracy.
//!
//! ```text
//! cargo run --release -p perio --example train_classifier -- [per_stage] [epochs]
//! ```

use perio::neural::{argmax_stage, build_classifier, train, ClassifierConfig, Tensor, TrainConfig};
use perio::phantom::NoiseLevel;
use perio::pipeline::{balanced_stage_crops, classifier_dataset};

fn main() -> perio::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let per_stage = args.first().copied().unwrap_or(60);
    let epochs = args.get(1).copied().unwrap_or(10);

    let (xs, ys) = balanced_stage_crops(per_stage, 64, 1, NoiseLevel::Clean)?;
    let (test_x, test_y) = balanced_stage_crops(per_stage / 2, 64, 99_991, NoiseLevel::Clean)?;
    let mut model = build_classifier(&ClassifierConfig::default())?;
    println!("{} parameters, {} training crops", model.param_count(), xs.len());

    let cfg = TrainConfig {
        learning_rate: 0.003,
        epochs,
        ..TrainConfig::default()
    };
    let curve = train(&mut model, &classifier_dataset(xs, &ys), &cfg)?;
    for (i, l) in curve.iter().enumerate() {
        println!("epoch {:>2}  loss {l:.4}", i + 1);
    }

    let mut hits = 0;
    for (x, y) in test_x.iter().zip(&test_y) {
        let p = model.predict(&Tensor::stack(&[x])?)?;
        hits += usize::from(argmax_stage(&p.data)? == *y);
    }
    println!("test accuracy {:.3} on {} crops", hits as f64 / test_y.len() as f64, test_y.len());
    Ok(())
}
