use std::path::{Path, PathBuf};

use super::{create_dir, write_run_manifest, RunConfig, DATASET_MANIFEST};
use crate::data::{
    split_assignments, write_image, write_mask, DatasetManifest, ManifestEntry, TileGenerator, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::tensor::{mix_seed, Rng};

/// Stream id for the split shuffle, distinct from every tile index.
const SPLIT_STREAM: u64 = u64::MAX;

/// Writes `cfg.synth_tiles` tile pairs plus a tagged manifest into `dir`.
/// Tile `i` depends only on `(seed, i)`.
pub fn synthesize(dir: &Path, cfg: &RunConfig) -> Result<DatasetManifest> {
    let size = cfg.model.input_size;
    let generator = TileGenerator::new(size, &cfg.synth_fractions)?;
    let tags = split_assignments(
        cfg.synth_tiles,
        cfg.split_percent,
        &mut Rng::new(mix_seed(cfg.seed, SPLIT_STREAM)),
    )?;
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(cfg.synth_tiles);
    let mut counts = [0u64; NUM_CLASSES];
    for (i, split) in tags.into_iter().enumerate() {
        let (img, mask) = generator.generate(&mut Rng::new(mix_seed(cfg.seed, i as u64)));
        mask.class_counts(NUM_CLASSES)
            .iter()
            .enumerate()
            .for_each(|(c, n)| counts[c] += n);
        let image = PathBuf::from(format!("images/tile_{i:05}.ppm"));
        let mask_path = PathBuf::from(format!("masks/tile_{i:05}.pgm"));
        write_image(dir.join(&image), &img)?;
        write_mask(dir.join(&mask_path), &mask)?;
        entries.push(ManifestEntry {
            image,
            mask: mask_path,
            split,
        });
    }
    let total: u64 = counts.iter().sum();
    let manifest = DatasetManifest {
        entries,
        seed: cfg.seed,
        tile_size: size,
        fractions: cfg.synth_fractions.clone(),
        realized: Some(counts.iter().map(|&c| c as f64 / total as f64).collect()),
    };
    manifest.save(dir.join(DATASET_MANIFEST))?;
    Ok(manifest)
}

/// `synth` command: refuses to touch a non-empty `data_dir` unless `force`.
pub fn run_synth(cfg: &RunConfig, force: bool) -> Result<DatasetManifest> {
    let dir = cfg.data_path();
    let occupied = std::fs::read_dir(&dir).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !force {
        return Err(Error::Config(format!(
            "{} already exists and is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    let manifest = synthesize(&dir, cfg)?;
    let mut artifacts = vec![dir.join(DATASET_MANIFEST)];
    for e in &manifest.entries {
        artifacts.push(dir.join(&e.image));
        artifacts.push(dir.join(&e.mask));
    }
    write_run_manifest(&dir, "synth", cfg, &artifacts)?;
    log::info!(
        "wrote {} tiles to {} ({} train / {} val / {} test)",
        manifest.entries.len(),
        dir.display(),
        manifest.count(crate::data::Split::Train),
        manifest.count(crate::data::Split::Val),
        manifest.count(crate::data::Split::Test)
    );
    Ok(manifest)
}
