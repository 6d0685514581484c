//! Dice training loss and the evaluation suite: confusion matrices,
//! per-class IOU / mIOU, border and interior accuracy, error maps.
//!
//! Scores are reported on a 0–100 scale.

mod report;

pub use report::{EvalSummary, Evaluator, MetricsReport};

use crate::data::MaskTile;
use crate::error::{dim_err, Error, Result};
use crate::model::Logits;
use crate::tensor::Tensor;

/// Smoothing term of the Dice coefficient.
pub const DICE_EPS: f32 = 1e-5;

/// Soft multi-class Dice loss pooled over every pixel of the batch:
/// `1 − mean_c (2·Σ p_c g_c + ε) / (Σ p_c + Σ g_c + ε)` with `p` the class
/// softmax and `g` the one-hot ground truth.
pub fn dice_loss(logits: &Logits, gt: &[&MaskTile]) -> Result<Tensor> {
    let (b, h, w, n) = (logits.batch(), logits.height(), logits.width(), logits.classes());
    if gt.len() != b {
        return Err(dim_err!("{} masks for a batch of {b} logits", gt.len()));
    }
    let mut labels = Vec::with_capacity(b * h * w);
    for m in gt {
        if (m.height, m.width) != (h, w) {
            return Err(dim_err!("mask {}x{} does not match logits {h}x{w}", m.height, m.width));
        }
        m.validate(n)?;
        labels.extend_from_slice(&m.labels);
    }
    dice_loss_flat(&logits.tensor.reshape(&[b * h * w, n])?, &labels)
}

/// Dice loss on `[pixels, classes]` logits.
pub fn dice_loss_flat(logits: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != labels.len() {
        return Err(dim_err!("logits {s:?} do not match {} labels", labels.len()));
    }
    let n = s[1];
    let mut onehot = vec![0.0f32; labels.len() * n];
    let mut gsum = vec![0.0f32; n];
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= n {
            return Err(Error::Validation(format!("label {l} is not below {n} classes")));
        }
        onehot[i * n + l] = 1.0;
        gsum[l] += 1.0;
    }
    let onehot = Tensor::new(s, onehot)?;
    let p = logits.softmax(-1)?;
    let inter = p.mul(&onehot)?.sum_axis(0)?;
    let psum = p.sum_axis(0)?;
    let num = inter.scale(2.0).add_scalar(DICE_EPS);
    let den = psum.add(&Tensor::new(&[n], gsum)?)?.add_scalar(DICE_EPS);
    Ok(num.div(&den)?.mean().neg().add_scalar(1.0))
}

/// `counts[i·n + j]` = pixels with ground truth `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Ground-truth pixel count per class.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.num_classes).map(|r| r.iter().sum()).collect()
    }

    /// Predicted pixel count per class.
    pub fn col_sums(&self) -> Vec<u64> {
        let n = self.num_classes;
        (0..n).map(|j| (0..n).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }
}

pub fn confusion_matrix(pred: &MaskTile, gt: &MaskTile, num_classes: usize) -> Result<ConfusionMatrix> {
    pred.same_extents(gt)?;
    pred.validate(num_classes)?;
    gt.validate(num_classes)?;
    let mut cm = ConfusionMatrix::new(num_classes);
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        cm.counts[g as usize * num_classes + p as usize] += 1;
    }
    Ok(cm)
}

/// Per-class `TP/(TP+FP+FN)` on 0–100 and their mean over classes present
/// in either mask; classes absent from both are `None` and excluded.
pub fn iou_scores(cm: &ConfusionMatrix) -> Result<(Vec<Option<f64>>, f64)> {
    if cm.total() == 0 {
        return Err(Error::Contract("IOU of an empty confusion matrix".into()));
    }
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let per_class: Vec<Option<f64>> = (0..cm.num_classes)
        .map(|c| {
            let tp = cm.get(c, c);
            let union = rows[c] + cols[c] - tp;
            (union > 0).then(|| 100.0 * tp as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok((per_class, miou))
}

/// Binary raster aligned with a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// 0/255 grayscale rendering.
    pub fn to_mask_tile(&self, on: u8) -> MaskTile {
        MaskTile {
            height: self.height,
            width: self.width,
            labels: self.bits.iter().map(|&b| if b { on } else { 0 }).collect(),
        }
    }
}

/// Pixels with a 4-neighbour of a different label. A label edge thereby
/// marks one pixel on each side: a two-pixel band.
pub fn border_mask(gt: &MaskTile) -> BinaryMask {
    let (h, w) = (gt.height, gt.width);
    let mut bits = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let l = gt.at(y, x);
            let differs = (y > 0 && gt.at(y - 1, x) != l)
                || (y + 1 < h && gt.at(y + 1, x) != l)
                || (x > 0 && gt.at(y, x - 1) != l)
                || (x + 1 < w && gt.at(y, x + 1) != l);
            bits[y * w + x] = differs;
        }
    }
    BinaryMask {
        height: h,
        width: w,
        bits,
    }
}

/// `(correct, total)` pixel counts inside `region`.
pub fn region_counts(pred: &MaskTile, gt: &MaskTile, region: &BinaryMask) -> Result<(u64, u64)> {
    pred.same_extents(gt)?;
    if (region.height, region.width) != (gt.height, gt.width) {
        return Err(dim_err!(
            "region {}x{} does not match mask",
            region.height,
            region.width
        ));
    }
    let mut correct = 0;
    let mut total = 0;
    for ((&p, &g), &r) in pred.labels.iter().zip(&gt.labels).zip(&region.bits) {
        if r {
            total += 1;
            correct += (p == g) as u64;
        }
    }
    Ok((correct, total))
}

/// Accuracy (0–100) restricted to `region`; an empty region is undefined.
pub fn region_accuracy(pred: &MaskTile, gt: &MaskTile, region: &BinaryMask) -> Result<f64> {
    let (correct, total) = region_counts(pred, gt, region)?;
    if total == 0 {
        return Err(Error::UndefinedRegion("accuracy over an empty region".into()));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Pixels where prediction and ground truth disagree.
pub fn error_map(pred: &MaskTile, gt: &MaskTile) -> Result<BinaryMask> {
    pred.same_extents(gt)?;
    Ok(BinaryMask {
        height: gt.height,
        width: gt.width,
        bits: pred.labels.iter().zip(&gt.labels).map(|(p, g)| p != g).collect(),
    })
}
