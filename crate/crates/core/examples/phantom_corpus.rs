//! Generates a small corpus at each noise level and writes it to disk.
//!
//! ```text
//! cargo run --release -p perio --example phantom_corpus -- out_dir
//! ```

use std::path::PathBuf;

use perio::phantom::{generate_corpus, write_corpus, NoiseLevel};

fn main() -> perio::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("perio_corpus"), PathBuf::from);
    for (name, level) in [("clean", NoiseLevel::Clean), ("mild", NoiseLevel::Mild), ("heavy", NoiseLevel::Heavy)] {
        let corpus = generate_corpus(6, 42, level)?;
        let dir = out.join(name);
        write_corpus(&corpus, &dir)?;
        for s in &corpus {
            let rbl: Vec<String> = s.render.truth.iter().map(|t| format!("{:.1}", t.rbl_percent)).collect();
            println!("{name}/{}: stage {} rbl [{}]", s.name(), s.scene_stage(), rbl.join(", "));
        }
    }
    println!("written to {}", out.display());
    Ok(())
}
