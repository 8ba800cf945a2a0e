use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use perio::neural::{
    build_classifier, build_toy_unet, load_model, save_model, train, write_loss_curve, ClassifierConfig, Dataset,
    ModelGraph, Targets, Tensor, TrainConfig, UNetConfig,
};
use perio::phantom::{generate_corpus, read_truth, shape_dataset, write_corpus, NoiseLevel};
use perio::pipeline::service::{serve, ServiceState};
use perio::pipeline::{classifier_dataset, evaluate_dirs, instances, overlay_png, AnalyzeOptions, RaterTable};
use perio::raster::io;
use perio::{analyze, Error, Result, StageThresholds};

#[derive(Parser)]
#[command(name = "perio", version, about = "Bone loss measurement and staging from dental masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure and stage every tooth in a mask triple.
    Analyze {
        #[arg(long)]
        tooth: PathBuf,
        #[arg(long)]
        bone: PathBuf,
        #[arg(long)]
        cej: PathBuf,
        /// Trained stage classifier.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 15.0)]
        t1: f64,
        #[arg(long, default_value_t = 33.0)]
        t2: f64,
        #[arg(long)]
        out: PathBuf,
        /// Write the label overlay as an indexed PNG.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Generate a seeded phantom corpus, or shape images with --shapes.
    Phantom {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 0 clean, 1 mild, 2 heavy.
        #[arg(long, default_value_t = 0)]
        noise: u8,
        /// Write image/mask pairs of this size for segmentation training.
        #[arg(long)]
        shapes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions (reports or masks) against phantom truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        raters: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a toy segmenter or the stage classifier.
    Train {
        kind: ModelKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        loss_curve: Option<PathBuf>,
        /// Classifier input size.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        base: usize,
        #[arg(long, default_value_t = 5)]
        kernel: usize,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Unet,
    Classifier,
}

fn load_optional(path: &Option<PathBuf>) -> Result<Option<ModelGraph>> {
    path.as_ref().map(load_model).transpose()
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

fn classifier_data(dir: &Path, size: usize) -> Result<Dataset> {
    let opts = AnalyzeOptions::default();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for scene in subdirs(dir)? {
        let truth = read_truth(&scene.join("truth.json"))?;
        let [t, b, c] = ["tooth", "bone", "cej"].map(|m| io::read_mask(scene.join(format!("{m}.png"))));
        let insts = instances(&t?, &b?, &c?, &opts)?;
        if insts.len() != truth.teeth.len() {
            eprintln!("skipping {}: {} teeth found, {} expected", scene.display(), insts.len(), truth.teeth.len());
            continue;
        }
        for (inst, t) in insts.iter().zip(&truth.teeth) {
            xs.push(perio::neural::crop_tensor(inst, size)?);
            ys.push(t.stage);
        }
    }
    Ok(classifier_dataset(xs, &ys))
}

fn segmentation_data(dir: &Path) -> Result<Dataset> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for sample in subdirs(dir)? {
        let img = io::decode_gray(&std::fs::read(sample.join("image.png"))?)?;
        let mask = io::read_mask(sample.join("mask.png"))?;
        let (w, h) = (img.width(), img.height());
        xs.push(Tensor::new(vec![1, h, w], img.data().to_vec())?);
        ys.push(Tensor::new(vec![1, h, w], mask.bits().iter().map(|&b| f64::from(u8::from(b))).collect())?);
    }
    Ok(Dataset {
        inputs: xs,
        targets: Targets::Masks(ys),
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Analyze {
            tooth,
            bone,
            cej,
            model,
            t1,
            t2,
            out,
            overlay,
        } => {
            let (t, b, c) = (io::read_mask(tooth)?, io::read_mask(bone)?, io::read_mask(cej)?);
            let model = load_optional(&model)?;
            let opts = AnalyzeOptions {
                thresholds: StageThresholds::new(t1, t2)?,
                ..AnalyzeOptions::default()
            };
            let report = analyze(&t, &b, &c, model.as_ref(), &opts)?;
            std::fs::write(&out, report.to_json()?)?;
            if let Some(p) = overlay {
                std::fs::write(p, overlay_png(&t, &b, &c)?)?;
            }
            for tooth in &report.teeth {
                let stage = tooth.stage_rule.map_or("-".to_string(), |s| s.to_string());
                let rbl = tooth.rbl_percent().map_or("-".to_string(), |r| format!("{r:.1}"));
                println!("tooth {}: rbl {rbl}% stage {stage}", tooth.id);
            }
        }
        Command::Phantom {
            count,
            seed,
            noise,
            shapes,
            out,
        } => match shapes {
            Some(size) => {
                for (i, (img, mask)) in shape_dataset(count, size, seed).iter().enumerate() {
                    let dir = out.join(format!("sample_{i:04}"));
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("image.png"), io::encode_gray(img)?)?;
                    io::write_mask(mask, dir.join("mask.png"))?;
                }
            }
            None => {
                let corpus = generate_corpus(count, seed, NoiseLevel::from_ordinal(noise)?)?;
                write_corpus(&corpus, &out)?;
            }
        },
        Command::Eval {
            pred,
            truth,
            raters,
            model,
            out,
        } => {
            let raters = raters.map(RaterTable::read).transpose()?;
            let model = load_optional(&model)?;
            let bundle = evaluate_dirs(&pred, &truth, raters.as_ref(), model.as_ref(), &AnalyzeOptions::default())?;
            std::fs::write(&out, serde_json::to_string_pretty(&bundle)?)?;
            if let Some(r) = &bundle.rule {
                println!("items {} rule accuracy {:.3}", bundle.items.len(), r.accuracy);
            }
        }
        Command::Train {
            kind,
            data,
            epochs,
            lr,
            batch,
            seed,
            out,
            loss_curve,
            size,
            depth,
            base,
            kernel,
        } => {
            let (mut model, dataset) = match kind {
                ModelKind::Classifier => (
                    build_classifier(&ClassifierConfig {
                        input_size: size,
                        seed,
                        ..ClassifierConfig::default()
                    })?,
                    classifier_data(&data, size)?,
                ),
                ModelKind::Unet => (
                    build_toy_unet(&UNetConfig {
                        depth,
                        base_channels: base,
                        kernel,
                        in_channels: 1,
                        seed,
                    })?,
                    segmentation_data(&data)?,
                ),
            };
            let cfg = TrainConfig {
                learning_rate: lr,
                batch_size: batch,
                epochs,
                seed,
                ..TrainConfig::default()
            };
            let curve = train(&mut model, &dataset, &cfg)?;
            save_model(&model, &out)?;
            if let Some(p) = loss_curve {
                write_loss_curve(&curve, p)?;
            }
            for (i, l) in curve.iter().enumerate() {
                println!("epoch {} loss {l:.5}", i + 1);
            }
        }
        Command::Serve { port, host, model } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad address {host}:{port}")))?;
            let state = ServiceState::new(load_optional(&model)?);
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(serve(addr, state))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
