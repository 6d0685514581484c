use super::{border_mask, confusion_matrix, iou_scores, region_counts, ConfusionMatrix};
use crate::data::{class_name, MaskTile};
use crate::error::{Error, Result};
use crate::kv::{self, KvMap};

/// Scores of one tile or of a pooled test set, all on 0–100.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    /// `None` when the region is empty (e.g. a single-class tile has no border).
    pub border_accuracy: Option<f64>,
    pub interior_accuracy: Option<f64>,
    pub overall_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(correct: u64, total: u64) -> Option<f64> {
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |v| format!("{v:.2}"))
}

fn parse_opt(map: &KvMap, key: &str) -> Result<Option<f64>> {
    match map.get(key).map(String::as_str) {
        None => Err(Error::Config(format!("report is missing `{key}`"))),
        Some("absent") => Ok(None),
        Some(_) => kv::get_parsed(map, key),
    }
}

fn parse_req(map: &KvMap, key: &str) -> Result<f64> {
    parse_opt(map, key)?.ok_or_else(|| Error::Config(format!("`{key}` must be a number")))
}

impl MetricsReport {
    /// Report from a confusion matrix plus `(correct, total)` pixel counts
    /// inside the border band and the interior.
    pub fn from_counts(confusion: ConfusionMatrix, border: (u64, u64), interior: (u64, u64)) -> Result<Self> {
        let (per_class_iou, miou) = iou_scores(&confusion)?;
        let overall_accuracy = 100.0 * confusion.correct() as f64 / confusion.total() as f64;
        Ok(MetricsReport {
            per_class_iou,
            miou,
            border_accuracy: ratio(border.0, border.1),
            interior_accuracy: ratio(interior.0, interior.1),
            overall_accuracy,
            confusion,
        })
    }

    pub fn for_tile(pred: &MaskTile, gt: &MaskTile, num_classes: usize) -> Result<Self> {
        let cm = confusion_matrix(pred, gt, num_classes)?;
        let border = border_mask(gt);
        let b = region_counts(pred, gt, &border)?;
        let i = region_counts(pred, gt, &border.complement())?;
        Self::from_counts(cm, b, i)
    }

    /// Ground-truth pixel count per class.
    pub fn class_pixels(&self) -> Vec<u64> {
        self.confusion.row_sums()
    }

    pub fn to_pairs(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = vec![(format!("{prefix}miou"), format!("{:.2}", self.miou))];
        for (c, v) in self.per_class_iou.iter().enumerate() {
            out.push((format!("{prefix}iou.{}", class_name(c)), fmt_opt(*v)));
        }
        out.push((format!("{prefix}border_accuracy"), fmt_opt(self.border_accuracy)));
        out.push((format!("{prefix}interior_accuracy"), fmt_opt(self.interior_accuracy)));
        out.push((
            format!("{prefix}overall_accuracy"),
            format!("{:.2}", self.overall_accuracy),
        ));
        let n = self.confusion.num_classes;
        for (c, px) in self.class_pixels().iter().enumerate() {
            out.push((format!("{prefix}pixels.{}", class_name(c)), px.to_string()));
        }
        for (c, row) in self.confusion.counts.chunks(n).enumerate() {
            out.push((format!("{prefix}confusion.{}", class_name(c)), kv::join(row)));
        }
        out
    }

    /// Inverse of [`Self::to_pairs`] (scores come back rounded to two decimals).
    pub fn from_map(map: &KvMap, prefix: &str, num_classes: usize) -> Result<Self> {
        let mut confusion = ConfusionMatrix::new(num_classes);
        for c in 0..num_classes {
            let key = format!("{prefix}confusion.{}", class_name(c));
            let row: Vec<u64> =
                kv::get_list(map, &key)?.ok_or_else(|| Error::Config(format!("report is missing `{key}`")))?;
            if row.len() != num_classes {
                return Err(Error::Config(format!("`{key}` needs {num_classes} entries")));
            }
            confusion.counts[c * num_classes..(c + 1) * num_classes].copy_from_slice(&row);
        }
        Ok(MetricsReport {
            per_class_iou: (0..num_classes)
                .map(|c| parse_opt(map, &format!("{prefix}iou.{}", class_name(c))))
                .collect::<Result<_>>()?,
            miou: parse_req(map, &format!("{prefix}miou"))?,
            border_accuracy: parse_opt(map, &format!("{prefix}border_accuracy"))?,
            interior_accuracy: parse_opt(map, &format!("{prefix}interior_accuracy"))?,
            overall_accuracy: parse_req(map, &format!("{prefix}overall_accuracy"))?,
            confusion,
        })
    }
}

/// Accumulates tiles of a test set: a pooled confusion matrix (the headline
/// numbers) and per-tile reports (averaged as a secondary view).
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub num_classes: usize,
    confusion: ConfusionMatrix,
    border: (u64, u64),
    interior: (u64, u64),
    tiles: Vec<MetricsReport>,
}

impl Evaluator {
    pub fn new(num_classes: usize) -> Self {
        Evaluator {
            num_classes,
            confusion: ConfusionMatrix::new(num_classes),
            border: (0, 0),
            interior: (0, 0),
            tiles: Vec::new(),
        }
    }

    /// Adds one tile and returns its own report.
    pub fn add(&mut self, pred: &MaskTile, gt: &MaskTile) -> Result<MetricsReport> {
        let cm = confusion_matrix(pred, gt, self.num_classes)?;
        let border = border_mask(gt);
        let b = region_counts(pred, gt, &border)?;
        let i = region_counts(pred, gt, &border.complement())?;
        self.confusion.merge(&cm);
        self.border = (self.border.0 + b.0, self.border.1 + b.1);
        self.interior = (self.interior.0 + i.0, self.interior.1 + i.1);
        let report = MetricsReport::from_counts(cm, b, i)?;
        self.tiles.push(report.clone());
        Ok(report)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn finish(&self) -> Result<EvalSummary> {
        if self.tiles.is_empty() {
            return Err(Error::Config("evaluation over zero tiles".into()));
        }
        let pooled = MetricsReport::from_counts(self.confusion.clone(), self.border, self.interior)?;
        let mean = |vals: Vec<Option<f64>>| {
            let defined: Vec<f64> = vals.into_iter().flatten().collect();
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
        };
        let t = &self.tiles;
        Ok(EvalSummary {
            tiles: t.len(),
            per_tile_miou: t.iter().map(|r| r.miou).sum::<f64>() / t.len() as f64,
            per_tile_class_iou: (0..self.num_classes)
                .map(|c| mean(t.iter().map(|r| r.per_class_iou[c]).collect()))
                .collect(),
            per_tile_border_accuracy: mean(t.iter().map(|r| r.border_accuracy).collect()),
            per_tile_interior_accuracy: mean(t.iter().map(|r| r.interior_accuracy).collect()),
            pooled,
        })
    }
}

/// Test-set summary: pooled report plus per-tile means.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub tiles: usize,
    pub pooled: MetricsReport,
    pub per_tile_miou: f64,
    pub per_tile_class_iou: Vec<Option<f64>>,
    pub per_tile_border_accuracy: Option<f64>,
    pub per_tile_interior_accuracy: Option<f64>,
}

impl EvalSummary {
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("tiles".to_string(), self.tiles.to_string())];
        out.extend(self.pooled.to_pairs("pooled."));
        out.push(("per_tile.miou".into(), format!("{:.2}", self.per_tile_miou)));
        for (c, v) in self.per_tile_class_iou.iter().enumerate() {
            out.push((format!("per_tile.iou.{}", class_name(c)), fmt_opt(*v)));
        }
        out.push((
            "per_tile.border_accuracy".into(),
            fmt_opt(self.per_tile_border_accuracy),
        ));
        out.push((
            "per_tile.interior_accuracy".into(),
            fmt_opt(self.per_tile_interior_accuracy),
        ));
        out
    }

    pub fn to_text(&self) -> String {
        kv::render(&self.to_pairs())
    }

    pub fn from_text(text: &str, num_classes: usize) -> Result<Self> {
        let map = kv::parse(text)?;
        Ok(EvalSummary {
            tiles: kv::get_parsed(&map, "tiles")?.ok_or_else(|| Error::Config("report is missing `tiles`".into()))?,
            pooled: MetricsReport::from_map(&map, "pooled.", num_classes)?,
            per_tile_miou: parse_req(&map, "per_tile.miou")?,
            per_tile_class_iou: (0..num_classes)
                .map(|c| parse_opt(&map, &format!("per_tile.iou.{}", class_name(c))))
                .collect::<Result<_>>()?,
            per_tile_border_accuracy: parse_opt(&map, "per_tile.border_accuracy")?,
            per_tile_interior_accuracy: parse_opt(&map, "per_tile.interior_accuracy")?,
        })
    }
}
