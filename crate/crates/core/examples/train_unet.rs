//! Fits the toy U-Net to random shape masks and writes the loss curve.

use perio::metrics::dice;
use perio::neural::{build_toy_unet, loss_curve_csv, train, Targets, Tensor, TrainConfig, UNetConfig};
use perio::pipeline::shape_segmentation_dataset;
use perio::Mask;

const SIZE: usize = 32;

fn main() -> perio::Result<()> {
    let data = shape_segmentation_dataset(200, SIZE, 5);
    let mut model = build_toy_unet(&UNetConfig {
        base_channels: 4,
        kernel: 3,
        ..UNetConfig::default()
    })?;
    let cfg = TrainConfig {
        learning_rate: 0.003,
        epochs: 30,
        seed: 1,
        ..TrainConfig::default()
    };
    let curve = train(&mut model, &data, &cfg)?;
    print!("{}", loss_curve_csv(&curve));

    let Targets::Masks(ys) = &data.targets else { unreachable!() };
    let to_mask = |t: &Tensor| Mask::from_bits(SIZE, SIZE, t.data.iter().map(|&v| v > 0.5).collect());
    let mut total = 0.0;
    for (x, y) in data.inputs.iter().zip(ys) {
        let p = model.predict(&Tensor::stack(&[x])?)?;
        total += dice(&to_mask(&p)?, &to_mask(y)?)?;
    }
    println!("mean dice {:.4}", total / ys.len() as f64);
    Ok(())
}
