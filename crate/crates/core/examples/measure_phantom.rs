//! Renders a three-tooth phantom, measures every tooth and compares the
//! result with the analytic truth.
//!
//! ```text
//! cargo run --release -p perio --example measure_phantom
//! ```

use perio::phantom::{render, PhantomScene, PhantomToothSpec};
use perio::{analyze, AnalyzeOptions};

fn main() -> perio::Result<()> {
    let scene = PhantomScene::new(
        260,
        190,
        vec![
            PhantomToothSpec::upright(60.0, 60.0, 32.0, 95.0).with_bone(9.0, 11.0),
            PhantomToothSpec::upright(135.0, 62.0, 40.0, 92.0).with_bone(21.0, 17.0).with_roots(2),
            PhantomToothSpec::upright(205.0, 58.0, 30.0, 90.0).with_bone(38.0, 30.0).with_tilt(-8.0),
        ],
    );
    let r = render(&scene)?;
    let report = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default())?;

    println!("{:>5} {:>9} {:>9} {:>6} {:>6}", "tooth", "rbl %", "truth %", "stage", "truth");
    for (t, truth) in report.teeth.iter().zip(&r.truth) {
        let rbl = t.rbl_percent().unwrap_or(f64::NAN);
        let stage = t.stage_rule.map_or("-".into(), |s| s.to_string());
        println!("{:>5} {rbl:>9.2} {:>9.2} {stage:>6} {:>6}", t.id, truth.rbl_percent, truth.stage);
        if let Some(m) = &t.measurement {
            println!(
                "      left {:.1}/{:.1} px, right {:.1}/{:.1} px",
                m.line1_left, m.line2_left, m.line1_right, m.line2_right
            );
        }
    }
    Ok(())
}
