use std::path::{Path, PathBuf};
use std::time::Instant;

use super::eval::{evaluate, load_split};
use super::{create_dir, write_run_manifest, RunConfig, RunLog};
use crate::data::{stratified_batches, AugmentPlan, ImageTile, MaskTile, Split, TileSet};
use crate::error::{dim_err, Error, Result};
use crate::metrics::dice_loss;
use crate::model::{BenthiqNet, Checkpoint, LoadOptions};
use crate::tensor::{detect_anomaly, mix_seed, Rng, Sgd};

const INIT_STREAM: u64 = 0x1A17;
const EPOCH_STREAM: u64 = 0xE90C;

pub const TRAIN_LOG: &str = "train_log.tsv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue from this checkpoint's weights, momentum and epoch count.
    pub resume: Option<PathBuf>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: BenthiqNet,
    /// Mean Dice loss over the batches of the last epoch.
    pub final_train_loss: f32,
    pub best_val_miou: Option<f64>,
    pub epochs: usize,
    /// Epochs whose batches fell back to unfiltered sampling.
    pub sampler_fallbacks: usize,
    pub log_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
}

/// Epoch `e` draws its batches and augmentations from a stream fixed by
/// `(seed, e)`, so a resumed run follows the uninterrupted trajectory.
fn epoch_rng(seed: u64, epoch: usize) -> Rng {
    Rng::new(mix_seed(mix_seed(seed, EPOCH_STREAM), epoch as u64))
}

fn batches_for(cfg: &RunConfig, train: &TileSet, rng: &mut Rng) -> Result<(Vec<Vec<usize>>, bool)> {
    if cfg.stratify {
        let counts = train.class_counts(cfg.model.num_classes);
        let plan = stratified_batches(&counts, cfg.batch_size, cfg.band, rng, cfg.max_attempts)?;
        Ok((plan.batches, plan.fallback))
    } else {
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        Ok((order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect(), false))
    }
}

fn check_sizes(set: &TileSet, size: usize, what: &str) -> Result<()> {
    match set.images.iter().find(|i| (i.height, i.width) != (size, size)) {
        Some(i) => Err(dim_err!(
            "{what} tile is {}x{}, model input is {size}x{size}",
            i.height,
            i.width
        )),
        None => Ok(()),
    }
}

/// Trains on in-memory tiles, writing the log and checkpoints to `out`.
pub fn train_on(
    cfg: &RunConfig,
    train: &TileSet,
    val: &TileSet,
    out: &Path,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let size = cfg.model.input_size;
    check_sizes(train, size, "training")?;
    check_sizes(val, size, "validation")?;
    create_dir(out)?;
    let log_path = out.join(TRAIN_LOG);
    let final_path = out.join(FINAL_CHECKPOINT);
    let best_path = out.join(BEST_CHECKPOINT);

    let mut model = BenthiqNet::build(&cfg.model, &mut Rng::new(mix_seed(cfg.seed, INIT_STREAM)))?;
    let mut start = 0;
    let mut best: Option<f64> = None;
    match &opts.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            model.load_state(&ckpt, LoadOptions::default())?;
            start = ckpt.epoch;
            best = ckpt.extra.get("best_val_miou").and_then(|v| v.parse().ok());
        }
        None => {
            if log_path.exists() {
                std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
            }
        }
    }
    let mut log = RunLog::open(&log_path)?;
    if opts.resume.is_none() {
        log.record(0, 0, "seed", cfg.seed)?;
        log.record(0, 0, "parameters", model.num_parameters())?;
        log.record(0, 0, "train_tiles", train.len())?;
        log.record(0, 0, "val_tiles", val.len())?;
        log.record(0, 0, "lr", cfg.lr)?;
    } else {
        log.record(start + 1, 0, "resume_epoch", start)?;
    }

    let opt = Sgd {
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
    };
    let mut final_loss = f32::NAN;
    let mut fallbacks = 0;
    let mut last_step = 0;
    let mut best_written = best_path.exists() && opts.resume.is_some();
    for epoch in start..cfg.epochs {
        let t0 = Instant::now();
        let e = epoch + 1;
        let mut rng = epoch_rng(cfg.seed, epoch);
        let (batches, fallback) = batches_for(cfg, train, &mut rng)?;
        if fallback {
            fallbacks += 1;
            log.record(e, 0, "sampler_fallback", 1)?;
        }
        let mut total = 0.0f64;
        for (k, batch) in batches.iter().enumerate() {
            let mut imgs = Vec::with_capacity(batch.len());
            let mut masks = Vec::with_capacity(batch.len());
            for &i in batch {
                let (img, mask) =
                    AugmentPlan::sample(&cfg.augment, &mut rng).apply(&train.images[i], &train.masks[i])?;
                imgs.push(img);
                masks.push(mask);
            }
            let img_refs: Vec<&ImageTile> = imgs.iter().collect();
            let mask_refs: Vec<&MaskTile> = masks.iter().collect();
            let x = ImageTile::batch_tensor(&img_refs)?;
            let loss = dice_loss(&model.forward(&x)?, &mask_refs)?;
            let value = loss.item()?;
            if !value.is_finite() {
                drop(loss);
                let (_, op) = detect_anomaly(|| -> Result<()> {
                    dice_loss(&model.forward(&x)?, &mask_refs)?;
                    Ok(())
                });
                let op = op.unwrap_or_else(|| "dice_loss".into());
                log.record(e, k + 1, "non_finite_loss", &op)?;
                return Err(Error::NonFinite { op });
            }
            loss.backward()?;
            opt.step(&mut model.params)?;
            total += value as f64;
        }
        final_loss = (total / batches.len() as f64) as f32;
        last_step = batches.len();
        log.record(e, batches.len(), "train_dice_loss", final_loss)?;
        if !val.is_empty() {
            let miou = evaluate(&model, val, cfg.batch_size)?.pooled.miou;
            log.record(e, batches.len(), "val_miou", format!("{miou:.4}"))?;
            if best.is_none_or(|b| miou > b) {
                best = Some(miou);
                let mut ckpt = Checkpoint::from_model(&model, cfg.seed, e);
                ckpt.extra.insert("best_val_miou".into(), format!("{miou}"));
                ckpt.save(&best_path)?;
                best_written = true;
                log.record(e, batches.len(), "best_checkpoint", e)?;
            }
        }
        log::info!(
            "epoch {e}/{}: dice loss {final_loss:.4}, {} batches, {:.1}s",
            cfg.epochs,
            batches.len(),
            t0.elapsed().as_secs_f32()
        );
    }
    let mut ckpt = Checkpoint::from_model(&model, cfg.seed, cfg.epochs.max(start));
    if let Some(b) = best {
        ckpt.extra.insert("best_val_miou".into(), format!("{b}"));
    }
    ckpt.save(&final_path)?;
    log.record(cfg.epochs.max(start), last_step, "final_checkpoint", FINAL_CHECKPOINT)?;
    Ok(TrainOutcome {
        model,
        final_train_loss: final_loss,
        best_val_miou: best,
        epochs: cfg.epochs,
        sampler_fallbacks: fallbacks,
        log_path,
        final_checkpoint: final_path,
        best_checkpoint: best_written.then_some(best_path),
    })
}

/// `train` command: trains on the manifest's train split (optionally its
/// first `train_limit` tiles), validates on the val split.
pub fn run_train(cfg: &RunConfig, opts: &TrainOptions) -> Result<TrainOutcome> {
    let mut train = load_split(cfg, Split::Train)?;
    if let Some(n) = cfg.train_limit {
        train = train.take(n);
    }
    let val = load_split(cfg, Split::Val)?;
    let out = cfg.output_dir();
    let outcome = train_on(cfg, &train, &val, &out, opts)?;
    let mut artifacts = vec![outcome.log_path.clone(), outcome.final_checkpoint.clone()];
    artifacts.extend(outcome.best_checkpoint.clone());
    write_run_manifest(&out, "train", cfg, &artifacts)?;
    Ok(outcome)
}
