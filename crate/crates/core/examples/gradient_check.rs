//! Finite-difference gradient checks on single layers and on small versions
//! of both networks.

use perio::neural::{
    build_classifier, build_toy_unet, gradient_check, CheckTarget, ClassifierConfig, Mode, ModelBuilder, Tensor,
    UNetConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> perio::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for k in [2, 3, 5, 7] {
        let mut b = ModelBuilder::new(&[2, 8, 8], 1);
        b.conv(3, k).sigmoid();
        let m = b.build()?;
        let x = random(&mut rng, &[1, 2, 8, 8]);
        let w = random(&mut rng, &[1, 3, 8, 8]);
        let r = gradient_check(&m, &x, &CheckTarget::Weighted(w), 1e-4, Mode::Eval)?;
        println!("conv {k}x{k} + sigmoid: max rel error {:.2e} passed {}", r.max_rel_error, r.passed);
    }

    let cls = build_classifier(&ClassifierConfig {
        input_size: 16,
        channels: [2, 3, 3, 4],
        hidden: 4,
        ..ClassifierConfig::default()
    })?;
    let x = random(&mut rng, &[2, 3, 16, 16]);
    let r = gradient_check(&cls, &x, &CheckTarget::Classes(vec![0, 2]), 1e-4, Mode::Eval)?;
    println!("classifier + cross-entropy: max rel error {:.2e} passed {}", r.max_rel_error, r.passed);
    for e in &r.entries {
        println!("  {:<14} {:>5} elements  {:.2e}", e.name, e.elements, e.max_rel_error);
    }

    let unet = build_toy_unet(&UNetConfig {
        depth: 2,
        base_channels: 2,
        kernel: 3,
        in_channels: 1,
        seed: 4,
    })?;
    let x = random(&mut rng, &[1, 1, 8, 8]);
    let target = Tensor::new(vec![1, 1, 8, 8], (0..64).map(|i| f64::from(u8::from(i % 3 == 0))).collect())?;
    let r = gradient_check(&unet, &x, &CheckTarget::Masks(target), 1e-4, Mode::Eval)?;
    println!("u-net + bce: max rel error {:.2e} passed {}", r.max_rel_error, r.passed);
    Ok(())
}
