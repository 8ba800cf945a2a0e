//! Scores rule staging on clean and noisy corpora, with simulated raters
//! that relabel a fraction of teeth.

use std::collections::BTreeMap;

use perio::phantom::{generate_corpus, NoiseLevel, TruthFile};
use perio::pipeline::{evaluate, RaterTable};
use perio::{analyze, AnalyzeOptions, Stage, StageReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> perio::Result<()> {
    for level in [NoiseLevel::Clean, NoiseLevel::Heavy] {
        let corpus = generate_corpus(40, 5, level)?;
        let mut preds = BTreeMap::new();
        let mut truths = BTreeMap::new();
        let mut raters = RaterTable {
            raters: vec!["r1".into(), "r2".into(), "r3".into()],
            ..RaterTable::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in &corpus {
            let r = &s.render;
            let report: StageReport = analyze(&r.tooth, &r.bone, &r.cej, None, &AnalyzeOptions::default())?;
            preds.insert(s.name(), report);
            truths.insert(s.name(), TruthFile { teeth: r.truth.clone() });
            for t in &r.truth {
                let labels = (0..3)
                    .map(|_| {
                        if rng.random_bool(0.15) {
                            Stage::from_index(rng.random_range(0..3)).unwrap()
                        } else {
                            t.stage
                        }
                    })
                    .collect();
                raters.rows.insert((s.name(), t.id), labels);
            }
        }
        let bundle = evaluate(&preds, &truths, Some(&raters))?;
        let rule = bundle.rule.as_ref().expect("items present");
        println!(
            "{level:?}: {} teeth, {} excluded, accuracy {:.3}, kappa {:?}, rbl mae {:.2}",
            bundle.items.len(),
            bundle.excluded.len(),
            rule.accuracy,
            rule.kappa,
            bundle.rbl_mean_abs_error.unwrap_or(f64::NAN)
        );
        if let Some(r) = &bundle.raters {
            for (label, row) in r.kappa.labels.iter().zip(&r.kappa.values) {
                let cells: Vec<String> = row.iter().map(|v| v.map_or("  -  ".into(), |k| format!("{k:.3}"))).collect();
                println!("  {label:>6} {}", cells.join(" "));
            }
        }
    }
    Ok(())
}
