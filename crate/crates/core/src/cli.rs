//! Command-line front end. Every command works inside a workspace directory:
//!
//! ```text
//! W/manifests/{split}.tsv          dataset manifests
//! W/data/{split}/                  generated synthetic images
//! W/checkpoints/*.ckpt, *.jsonl    trained models and their training logs
//! W/bitstreams/                    compressed files, sidecars, decoded images
//! W/pairs/                         compressed/original training pairs
//! W/reports/                       report.csv, table.txt, images.csv, report.json
//! W/figures/                       RD curves and noise maps
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::codec::{Bitstream, CodecConfig, ScalableCodec};
use crate::error::{Error, Result};
use crate::eval::{self, Accounting, EvalInputs, Overlay, Report};
use crate::fsutil::write_atomic;
use crate::imaging::{build_manifest, load_image, synth, DatasetManifest};
use crate::postproc::{refine, PostprocModel, RrdbConfig};
use crate::training::{
    self, build_pairs, grad_check, train_codec, train_postproc, GradCheckTarget, PairSet, Target, TrainConfig,
};

/// λ values of the reference sweep.
pub const LAMBDAS: [f64; 4] = [0.005, 0.010, 0.020, 0.030];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Parser)]
#[command(name = "sicr", about = "Scalable learned image coding with RRDB post-processing", version)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Single-threaded execution with fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Model and training scale.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Ws {
    /// Workspace root; all outputs go below it.
    #[arg(long)]
    pub workspace: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layer {
    Base,
    Enh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckTarget {
    All,
    Rrdb,
    CodecBase,
    CodecEnh,
    Rate,
    ZeroRrdb,
    ZeroCodec,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from an image folder, or from a generated corpus.
    Prepare {
        #[command(flatten)]
        ws: Ws,
        /// Folder of PNG images.
        #[arg(long, required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        /// Generate this many synthetic images under W/data/{split}.
        #[arg(long, conflicts_with = "input")]
        synthetic: Option<usize>,
        /// Side of generated images.
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Train the base layer or an enhancement layer.
    TrainCodec {
        #[command(flatten)]
        ws: Ws,
        #[arg(long, value_enum)]
        layer: Layer,
        /// Rate-distortion weight (defaults to the preset's base λ for the
        /// base layer).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = "train")]
        split: String,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Compress one image with the base and a λ enhancement layer.
    Compress {
        #[command(flatten)]
        ws: Ws,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Decode a bitstream into machine and human reconstructions.
    Decompress {
        #[command(flatten)]
        ws: Ws,
        #[arg(long)]
        bitstream: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Compress a split into training pairs at one λ.
    BuildPairs {
        #[command(flatten)]
        ws: Ws,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 128)]
        pair_patch: usize,
    },
    /// Train a post-processor for one λ (building pairs when missing).
    TrainPostproc {
        #[command(flatten)]
        ws: Ws,
        #[arg(long)]
        lambda: f64,
        /// Number of RRDBs.
        #[arg(long)]
        l: usize,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, default_value_t = 128)]
        pair_patch: usize,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Apply a post-processor to a decoded image.
    Refine {
        #[command(flatten)]
        ws: Ws,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        l: usize,
    },
    /// Evaluate every (λ, l) cell on a split and write the reports.
    Evaluate {
        #[command(flatten)]
        ws: Ws,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long, value_delimiter = ',', default_values_t = LAMBDAS)]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
        levels: Vec<usize>,
    },
    /// Draw RD curves from the last evaluation.
    Plot {
        #[command(flatten)]
        ws: Ws,
        /// External series as NAME=PATH to a bpp,psnr CSV.
        #[arg(long)]
        overlay: Vec<String>,
    },
    /// Write reconstructions and shared-scale noise maps of one image.
    NoiseMaps {
        #[command(flatten)]
        ws: Ws,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        image_id: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        l: usize,
    },
    /// Compare analytic gradients with finite differences.
    GradCheck {
        #[arg(long, value_enum, default_value_t = CheckTarget::All)]
        target: CheckTarget,
    },
}

fn lambda_tag(lambda: f64) -> String {
    format!("{lambda:.3}")
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn new(ws: &Ws) -> Self {
        Layout {
            root: ws.workspace.clone(),
        }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    fn manifest(&self, split: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{split}.tsv"))
    }

    fn base(&self) -> PathBuf {
        self.root.join("checkpoints").join("base.ckpt")
    }

    fn enh(&self, lambda: f64) -> PathBuf {
        self.root.join("checkpoints").join(format!("enh_lambda{}.ckpt", lambda_tag(lambda)))
    }

    fn postproc(&self, lambda: f64, l: usize) -> PathBuf {
        self.root
            .join("checkpoints")
            .join(format!("postproc_lambda{}_l{l}.ckpt", lambda_tag(lambda)))
    }

    fn pairs(&self, lambda: f64, patch: usize) -> PathBuf {
        self.root
            .join("pairs")
            .join(format!("pairs_lambda{}_p{patch}.bin", lambda_tag(lambda)))
    }
}

fn load_ckpt(path: &Path, what: &str) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!("missing {what} checkpoint {}", path.display())));
    }
    Checkpoint::load(path)
}

fn codec_at(layout: &Layout, lambda: f64) -> Result<ScalableCodec> {
    let enh_path = layout.enh(lambda);
    if !enh_path.exists() {
        return Err(Error::MissingCell { lambda, l: None });
    }
    let base = load_ckpt(&layout.base(), "base codec")?;
    ScalableCodec::from_checkpoints(&base, &Checkpoint::load(enh_path)?)
}

fn train_config(cli: &Cli, target: Target, flags: &TrainFlags) -> TrainConfig {
    let mut c = match cli.preset {
        Preset::Desk => TrainConfig::desk(target),
        Preset::Full => TrainConfig::full(target),
    };
    c.seed = cli.seed;
    c.deterministic = cli.deterministic;
    if let Some(v) = flags.epochs {
        c.epochs = v;
    }
    if let Some(v) = flags.batch {
        c.batch_size = v;
    }
    if let Some(v) = flags.patch {
        c.patch = v;
    }
    if let Some(v) = flags.lr {
        c.learning_rate = v;
    }
    c
}

fn save_outcome(outcome: &training::TrainOutcome, path: &Path) -> Result<()> {
    outcome.checkpoint.save(path)?;
    write_atomic(&path.with_extension("jsonl"), outcome.log_text().as_bytes())?;
    if let Some(last) = outcome.log.last() {
        println!("{}", last.to_json_line());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Prepare {
            ws,
            input,
            synthetic,
            size,
            split,
        } => {
            let layout = Layout::new(ws);
            let dir = match (input, synthetic) {
                (Some(dir), _) => dir.clone(),
                (None, Some(count)) => {
                    let dir = layout.dir("data")?.join(split);
                    synth::write_synthetic_corpus(&dir, *count, *size, *size, cli.seed)?;
                    dir
                }
                (None, None) => return Err(Error::Config("need --input or --synthetic".into())),
            };
            let manifest = build_manifest(&dir, split)?;
            layout.dir("manifests")?;
            manifest.save(layout.manifest(split))?;
            println!("{} entries -> {}", manifest.len(), layout.manifest(split).display());
        }
        Command::TrainCodec {
            ws,
            layer,
            lambda,
            split,
            train,
        } => {
            let layout = Layout::new(ws);
            let manifest = DatasetManifest::load(layout.manifest(split))?;
            let codec = match cli.preset {
                Preset::Desk => CodecConfig::desk(),
                Preset::Full => CodecConfig::full(),
            };
            layout.dir("checkpoints")?;
            match layer {
                Layer::Base => {
                    let mut c = train_config(cli, Target::BaseCodec, train);
                    c.lambda = lambda.unwrap_or(codec.lambda_base);
                    let codec = CodecConfig {
                        lambda_base: c.lambda,
                        ..codec
                    };
                    save_outcome(&train_codec(&manifest, &c, &codec, None)?, &layout.base())?;
                }
                Layer::Enh => {
                    let mut c = train_config(cli, Target::EnhCodec, train);
                    c.lambda = lambda.ok_or_else(|| Error::Config("--lambda is required for --layer enh".into()))?;
                    let base = load_ckpt(&layout.base(), "base codec")?;
                    let out = train_codec(&manifest, &c, base.codec_config()?, Some(&base))?;
                    save_outcome(&out, &layout.enh(c.lambda))?;
                }
            }
        }
        Command::Compress { ws, image, lambda } => {
            let layout = Layout::new(ws);
            let codec = codec_at(&layout, *lambda)?;
            let img = load_image(image)?;
            let bs = codec.compress(&img)?.bitstream;
            let out = layout
                .dir("bitstreams")?
                .join(format!("{}_lambda{}.sicr", file_stem(image), lambda_tag(*lambda)));
            let bytes = bs.to_bytes();
            write_atomic(&out, &bytes)?;
            let sidecar = format!(
                "base_bytes={} enh_bytes={} container_bytes={} width={} height={}\n",
                bs.base_payload.len(),
                bs.enh_payload.len(),
                bytes.len(),
                img.width(),
                img.height()
            );
            write_atomic(&out.with_extension("txt"), sidecar.as_bytes())?;
            print!("{sidecar}");
            println!("wrote {}", out.display());
        }
        Command::Decompress { ws, bitstream, lambda } => {
            let layout = Layout::new(ws);
            let codec = codec_at(&layout, *lambda)?;
            let bytes = std::fs::read(bitstream).map_err(|e| Error::io(bitstream, e))?;
            let (machine, human) = codec.decompress(&Bitstream::parse(&bytes)?)?;
            let dir = layout.dir("bitstreams")?;
            let stem = file_stem(bitstream);
            machine.save_png(dir.join(format!("{stem}_machine.png")))?;
            human.save_png(dir.join(format!("{stem}_human.png")))?;
            println!("wrote {stem}_machine.png and {stem}_human.png in {}", dir.display());
        }
        Command::BuildPairs {
            ws,
            lambda,
            split,
            pair_patch,
        } => {
            let layout = Layout::new(ws);
            let pairs = make_pairs(&layout, *lambda, split, *pair_patch)?;
            println!("{} pairs -> {}", pairs.len(), layout.pairs(*lambda, *pair_patch).display());
        }
        Command::TrainPostproc {
            ws,
            lambda,
            l,
            split,
            pair_patch,
            train,
        } => {
            let layout = Layout::new(ws);
            let path = layout.pairs(*lambda, *pair_patch);
            let pairs = if path.exists() {
                PairSet::load(&path)?
            } else {
                make_pairs(&layout, *lambda, split, *pair_patch)?
            };
            let c = train_config(cli, Target::Postproc, train);
            let model = match cli.preset {
                Preset::Desk => RrdbConfig::desk(*l),
                Preset::Full => RrdbConfig::full(*l),
            };
            layout.dir("checkpoints")?;
            save_outcome(&train_postproc(&pairs, &c, &model)?, &layout.postproc(*lambda, *l))?;
        }
        Command::Refine { ws, image, lambda, l } => {
            let layout = Layout::new(ws);
            let ck = load_ckpt(&layout.postproc(*lambda, *l), "post-processor")?;
            let model = PostprocModel::from_checkpoint(&ck)?;
            let out = layout.dir("bitstreams")?.join(format!("{}_refined_l{l}.png", file_stem(image)));
            refine(&load_image(image)?, &model).save_png(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Evaluate {
            ws,
            split,
            lambdas,
            levels,
        } => {
            let layout = Layout::new(ws);
            // Missing cells are reported before anything is loaded.
            for &lambda in lambdas {
                for &l in levels {
                    if !layout.postproc(lambda, l).exists() {
                        return Err(Error::MissingCell { lambda, l: Some(l) });
                    }
                }
                if !layout.enh(lambda).exists() {
                    return Err(Error::MissingCell { lambda, l: None });
                }
            }
            let base = load_ckpt(&layout.base(), "base codec")?;
            let enh = lambdas
                .iter()
                .map(|&lam| Checkpoint::load(layout.enh(lam)))
                .collect::<Result<Vec<_>>>()?;
            let mut pp = Vec::new();
            for &lam in lambdas {
                for &l in levels {
                    pp.push((lam, Checkpoint::load(layout.postproc(lam, l))?));
                }
            }
            let inputs = EvalInputs {
                base: &base,
                enh: enh.iter().collect(),
                postproc: pp.iter().map(|(lam, ck)| (*lam, ck)).collect(),
                levels: levels.clone(),
                seed: cli.seed,
            };
            let manifest = DatasetManifest::load(layout.manifest(split))?;
            let report = eval::evaluate_rd(&manifest, &inputs)?;
            let table = eval::render_table(&report);
            let dir = layout.dir("reports")?;
            write_atomic(&dir.join("report.csv"), table.csv.as_bytes())?;
            write_atomic(&dir.join("table.txt"), table.text.as_bytes())?;
            write_atomic(&dir.join("images.csv"), report.images_csv().as_bytes())?;
            write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
            print!("{}", table.text);
        }
        Command::Plot { ws, overlay } => {
            let layout = Layout::new(ws);
            let path = layout.root.join("reports").join("report.json");
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let report: Report = serde_json::from_str(&text)?;
            let overlays = overlay
                .iter()
                .map(|spec| {
                    let (name, file) = spec
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("overlay '{spec}' is not NAME=PATH")))?;
                    let body = std::fs::read_to_string(file).map_err(|e| Error::io(Path::new(file), e))?;
                    Overlay::parse_csv(name, &body)
                })
                .collect::<Result<Vec<_>>>()?;
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
            let dir = layout.dir("figures")?;
            for acc in [Accounting::AdditionalOnly, Accounting::Total] {
                for p in eval::plot_rd(&report, acc, &dir, &stamp, &overlays)? {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::NoiseMaps {
            ws,
            split,
            image_id,
            lambda,
            l,
        } => {
            let layout = Layout::new(ws);
            let manifest = DatasetManifest::load(layout.manifest(split))?;
            let codec = codec_at(&layout, *lambda)?;
            let pp_path = layout.postproc(*lambda, *l);
            if !pp_path.exists() {
                return Err(Error::MissingCell {
                    lambda: *lambda,
                    l: Some(*l),
                });
            }
            let model = PostprocModel::from_checkpoint(&Checkpoint::load(pp_path)?)?;
            let out = eval::emit_noise_maps(image_id, &manifest, &codec, &model, &layout.dir("figures")?)?;
            println!(
                "scale {:.4}; mean brightness human {:.4}, refined {:.4}",
                out.scale, out.human_mean_brightness, out.refined_mean_brightness
            );
        }
        Command::GradCheck { target } => {
            let targets: Vec<GradCheckTarget> = match target {
                CheckTarget::All => GradCheckTarget::ALL.to_vec(),
                CheckTarget::Rrdb => vec![GradCheckTarget::Rrdb],
                CheckTarget::CodecBase => vec![GradCheckTarget::CodecBase],
                CheckTarget::CodecEnh => vec![GradCheckTarget::CodecEnh],
                CheckTarget::Rate => vec![GradCheckTarget::Rate],
                CheckTarget::ZeroRrdb => vec![GradCheckTarget::ZeroRrdb],
                CheckTarget::ZeroCodec => vec![GradCheckTarget::ZeroCodec],
            };
            for t in targets {
                let r = grad_check(t, cli.seed);
                println!(
                    "{:<10} checked {:>5}  max rel {:.3e}  max abs {:.3e}  worst {}",
                    t.name(),
                    r.checked,
                    r.max_rel_error,
                    r.max_abs_error,
                    r.worst
                );
            }
        }
    }
    Ok(())
}

fn make_pairs(layout: &Layout, lambda: f64, split: &str, patch: usize) -> Result<PairSet> {
    let manifest = DatasetManifest::load(layout.manifest(split))?;
    let base = load_ckpt(&layout.base(), "base codec")?;
    let enh_path = layout.enh(lambda);
    if !enh_path.exists() {
        return Err(Error::MissingCell { lambda, l: None });
    }
    let pairs = build_pairs(&manifest, &base, &Checkpoint::load(enh_path)?, patch)?;
    layout.dir("pairs")?;
    pairs.save(layout.pairs(lambda, patch))?;
    Ok(pairs)
}

/// Parses `args` (without the program name) and runs the command.
/// Returns 0 on success, 2 for usage errors and 1 for failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("sicr")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = if cli.deterministic {
        match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        }
    } else {
        execute(&cli)
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
