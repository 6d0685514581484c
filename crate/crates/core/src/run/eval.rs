use std::path::Path;

use super::{write_run_manifest, write_text, RunConfig, DATASET_MANIFEST};
use crate::data::{DatasetManifest, ImageTile, MaskTile, Split, TileSet};
use crate::error::{Error, Result};
use crate::metrics::{EvalSummary, Evaluator};
use crate::model::{load_checkpoint, BenthiqNet};

/// Anything that maps images to class masks.
pub trait Segmenter {
    fn num_classes(&self) -> usize;
    /// Expected square input side, if fixed.
    fn input_size(&self) -> Option<usize>;
    fn segment(&self, images: &[&ImageTile]) -> Result<Vec<MaskTile>>;
}

impl Segmenter for BenthiqNet {
    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn input_size(&self) -> Option<usize> {
        Some(self.config.input_size)
    }

    fn segment(&self, images: &[&ImageTile]) -> Result<Vec<MaskTile>> {
        self.predict_masks(images)
    }
}

/// Predicts the same class everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSegmenter {
    pub class: u8,
    pub num_classes: usize,
}

impl Segmenter for ConstantSegmenter {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_size(&self) -> Option<usize> {
        None
    }

    fn segment(&self, images: &[&ImageTile]) -> Result<Vec<MaskTile>> {
        Ok(images
            .iter()
            .map(|i| MaskTile::filled(i.height, i.width, self.class))
            .collect())
    }
}

/// Scores `seg` on every tile of `set`, `batch` images at a time.
pub fn evaluate(seg: &dyn Segmenter, set: &TileSet, batch: usize) -> Result<EvalSummary> {
    if set.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let mut ev = Evaluator::new(seg.num_classes());
    for (imgs, masks) in set.images.chunks(batch.max(1)).zip(set.masks.chunks(batch.max(1))) {
        let refs: Vec<&ImageTile> = imgs.iter().collect();
        for (pred, gt) in seg.segment(&refs)?.iter().zip(masks) {
            ev.add(pred, gt)?;
        }
    }
    ev.finish()
}

/// The constant predictor of the most frequent ground-truth class of `set`
/// (ties to the lowest id), scored on `set`.
pub fn majority_baseline(set: &TileSet, num_classes: usize) -> Result<(u8, EvalSummary)> {
    let mut counts = vec![0u64; num_classes];
    for m in &set.masks {
        m.class_counts(num_classes)
            .iter()
            .enumerate()
            .for_each(|(c, n)| counts[c] += n);
    }
    let class = (0..num_classes).fold(0, |best, c| if counts[c] > counts[best] { c } else { best }) as u8;
    let seg = ConstantSegmenter { class, num_classes };
    Ok((class, evaluate(&seg, set, 16)?))
}

pub(crate) fn load_split(cfg: &RunConfig, split: Split) -> Result<TileSet> {
    let root = cfg.data_path();
    let manifest = DatasetManifest::load(root.join(DATASET_MANIFEST))?;
    TileSet::load(&manifest, &root, split, cfg.model.num_classes)
}

/// `eval` command: scores a checkpoint on the test split and writes
/// `eval_report.txt` (pooled and per-tile-mean metrics) to the output dir.
pub fn run_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalSummary> {
    let model = load_checkpoint(checkpoint)?;
    let test = load_split(cfg, Split::Test)?;
    if test.is_empty() {
        return Err(Error::Config("test split is empty".into()));
    }
    let summary = evaluate(&model, &test, cfg.batch_size)?;
    let out = cfg.output_dir();
    super::create_dir(&out)?;
    let report = out.join("eval_report.txt");
    write_text(&report, &summary.to_text())?;
    write_run_manifest(&out, "eval", cfg, &[report])?;
    Ok(summary)
}
