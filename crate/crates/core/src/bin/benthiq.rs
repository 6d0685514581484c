use std::path::PathBuf;
use std::process::ExitCode;

use benthiq::run::{self, RunConfig, TrainOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "benthiq",
    about = "Benthic habitat segmentation: synth, train, eval, predict, ablate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=10` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> benthiq::Result<RunConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| benthiq::Error::Io {
                path: p.display().to_string(),
                source: e,
            })?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        let flags = [
            ("lr", self.lr.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("data_dir", self.data_dir.as_ref().map(|v| v.display().to_string())),
            ("out_dir", self.out_dir.as_ref().map(|v| v.display().to_string())),
        ];
        overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| format!("{k}={v}"))));
        RunConfig::from_text_with(&text, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tile dataset with a tagged manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Overwrite a non-empty data directory.
        #[arg(long)]
        force: bool,
    },
    /// Train on the train split, validating each epoch.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Segment images, writing masks, color renders and error maps.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "image", required = true)]
        images: Vec<PathBuf>,
        /// Ground-truth masks, one per image, in the same order.
        #[arg(long = "gt")]
        gts: Vec<PathBuf>,
    },
    /// Train and evaluate the input-size / upsampling / variant grid.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Command) -> benthiq::Result<()> {
    match cmd {
        Command::Synth { common, force } => {
            let m = run::run_synth(&common.load()?, force)?;
            println!("{} tiles written", m.entries.len());
        }
        Command::Train { common, resume } => {
            let o = run::run_train(&common.load()?, &TrainOptions { resume })?;
            println!("final train dice loss {:.4}", o.final_train_loss);
            if let Some(b) = o.best_val_miou {
                println!("best val mIOU {b:.2}");
            }
            println!("checkpoint {}", o.final_checkpoint.display());
        }
        Command::Eval { common, checkpoint } => {
            print!("{}", run::run_eval(&common.load()?, &checkpoint)?.to_text());
        }
        Command::Predict {
            common,
            checkpoint,
            images,
            gts,
        } => {
            let gts = (!gts.is_empty()).then_some(gts.as_slice());
            let preds = run::run_predict(&common.load()?, &checkpoint, &images, gts)?;
            for p in preds {
                println!("{} -> {}", p.image.display(), p.mask.display());
            }
        }
        Command::Ablate { common } => {
            let cfg = common.load()?;
            let rows = run::run_ablate(&cfg)?;
            print!("{}", run::render_ablation_table(&rows, cfg.model.num_classes));
        }
    }
    Ok(())
}
