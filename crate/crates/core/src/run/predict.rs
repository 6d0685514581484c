use std::path::{Path, PathBuf};

use super::eval::Segmenter;
use super::{create_dir, write_run_manifest, RunConfig};
use crate::data::{read_image, read_mask, render_mask, write_image, write_mask, ImageTile};
use crate::error::{dim_err, Error, Result};
use crate::metrics::{error_map, MetricsReport};
use crate::model::load_checkpoint;

/// Files written for one input image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub render: PathBuf,
    /// Present when ground truth was supplied.
    pub error_map: Option<PathBuf>,
    pub miou: Option<f64>,
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

/// Segments each image and writes `<stem>_mask.pgm`, `<stem>_color.ppm`
/// and, with ground truth, `<stem>_error.pgm` (255 where wrong) to `out`.
pub fn predict_with(
    seg: &dyn Segmenter,
    images: &[PathBuf],
    gts: Option<&[PathBuf]>,
    out: &Path,
) -> Result<Vec<Prediction>> {
    if let Some(g) = gts {
        if g.len() != images.len() {
            return Err(Error::Config(format!(
                "{} ground-truth masks for {} images",
                g.len(),
                images.len()
            )));
        }
    }
    create_dir(out)?;
    let mut results = Vec::with_capacity(images.len());
    for (i, path) in images.iter().enumerate() {
        let img: ImageTile = read_image(path)?;
        if let Some(n) = seg.input_size() {
            if (img.height, img.width) != (n, n) {
                return Err(dim_err!(
                    "{} is {}x{}, the model takes {n}x{n} (no resizing is done)",
                    path.display(),
                    img.height,
                    img.width
                ));
            }
        }
        let pred = seg.segment(&[&img])?.remove(0);
        let s = stem(path);
        let mask = out.join(format!("{s}_mask.pgm"));
        let render = out.join(format!("{s}_color.ppm"));
        write_mask(&mask, &pred)?;
        write_image(&render, &render_mask(&pred))?;
        let (mut err_path, mut miou) = (None, None);
        if let Some(g) = gts {
            let gt = read_mask(&g[i], seg.num_classes())?;
            let p = out.join(format!("{s}_error.pgm"));
            write_mask(&p, &error_map(&pred, &gt)?.to_mask_tile(255))?;
            let score = MetricsReport::for_tile(&pred, &gt, seg.num_classes())?.miou;
            println!("{}\tmiou={score:.2}", path.display());
            err_path = Some(p);
            miou = Some(score);
        }
        results.push(Prediction {
            image: path.clone(),
            mask,
            render,
            error_map: err_path,
            miou,
        });
    }
    Ok(results)
}

/// `predict` command.
pub fn run_predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    images: &[PathBuf],
    gts: Option<&[PathBuf]>,
) -> Result<Vec<Prediction>> {
    let model = load_checkpoint(checkpoint)?;
    let out = cfg.output_dir();
    let preds = predict_with(&model, images, gts, &out)?;
    let mut artifacts = Vec::new();
    for p in &preds {
        artifacts.push(p.mask.clone());
        artifacts.push(p.render.clone());
        artifacts.extend(p.error_map.clone());
    }
    write_run_manifest(&out, "predict", cfg, &artifacts)?;
    Ok(preds)
}
