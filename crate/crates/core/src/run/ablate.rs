use std::collections::BTreeMap;

use super::eval::{evaluate, load_split};
use super::train::{train_on, TrainOptions};
use super::{create_dir, write_run_manifest, write_text, RunConfig};
use crate::data::{class_name, resize_pair, Split, TileSet};
use crate::error::Result;
use crate::metrics::EvalSummary;
use crate::model::{ModelConfig, Upsampling, Variant};

/// One cell of the sweep; failures are kept as messages.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub input_size: usize,
    pub upsampling: Upsampling,
    pub variant: Variant,
    pub result: std::result::Result<EvalSummary, String>,
}

impl AblationRow {
    pub fn label(&self) -> String {
        format!("{}_{}_{}", self.input_size, self.upsampling, self.variant)
    }
}

fn resized(set: &TileSet, size: usize) -> Result<TileSet> {
    let mut out = TileSet::default();
    for (img, mask) in set.images.iter().zip(&set.masks) {
        let (i, m) = resize_pair(img, mask, size)?;
        out.push(i, m)?;
    }
    Ok(out)
}

fn cell_config(cfg: &RunConfig, size: usize, up: Upsampling, variant: Variant) -> Result<RunConfig> {
    let mut c = cfg.clone();
    c.model = ModelConfig {
        input_size: size,
        upsampling: up,
        num_classes: cfg.model.num_classes,
        ..ModelConfig::for_variant(variant)?
    };
    c.validate()?;
    Ok(c)
}

/// Column order: input size, upsampling, model size, mIOU, then per-class IOU.
pub fn render_ablation_table(rows: &[AblationRow], num_classes: usize) -> String {
    let mut head = format!("{:<10} {:<12} {:<12} {:>7}", "Input", "Upsampling", "Model", "mIOU");
    for c in 0..num_classes {
        head.push_str(&format!(" {:>7}", capitalize(&class_name(c))));
    }
    let mut out = format!("{head}\n{}\n", "-".repeat(head.len()));
    for r in rows {
        let mut line = format!(
            "{:<10} {:<12} {:<12}",
            format!("{0}x{0}", r.input_size),
            r.upsampling.to_string(),
            r.variant.to_string()
        );
        match &r.result {
            Ok(s) => {
                line.push_str(&format!(" {:>7.2}", s.pooled.miou));
                for v in &s.pooled.per_class_iou {
                    line.push_str(&v.map_or_else(|| format!(" {:>7}", "-"), |v| format!(" {v:>7.2}")));
                }
            }
            Err(e) => line.push_str(&format!(" failed: {e}")),
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

fn structured(rows: &[AblationRow], num_classes: usize) -> String {
    let mut out = String::from("input_size\tupsampling\tvariant\tstatus\tmiou");
    for c in 0..num_classes {
        out.push_str(&format!("\tiou_{}", class_name(c)));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}", r.input_size, r.upsampling, r.variant));
        match &r.result {
            Ok(s) => {
                out.push_str(&format!("\tok\t{:.2}", s.pooled.miou));
                for v in &s.pooled.per_class_iou {
                    out.push_str(&v.map_or_else(|| "\tabsent".to_string(), |v| format!("\t{v:.2}")));
                }
            }
            Err(e) => {
                out.push_str(&format!("\tfailed: {}\t", e.replace('\t', " ")));
                out.push_str(&"\t".repeat(num_classes.saturating_sub(1)));
            }
        }
        out.push('\n');
    }
    out
}

/// `ablate` command: trains and evaluates every (input size, upsampling,
/// variant) cell, then writes `ablation_table.txt` and `ablation.tsv`.
/// A failing cell is recorded and the sweep continues.
pub fn run_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let mut train = load_split(cfg, Split::Train)?;
    if let Some(n) = cfg.train_limit {
        train = train.take(n);
    }
    let val = load_split(cfg, Split::Val)?;
    let test = load_split(cfg, Split::Test)?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    let mut cache: BTreeMap<usize, (TileSet, TileSet, TileSet)> = BTreeMap::new();
    let mut rows = Vec::new();
    for &size in &cfg.ablate_input_sizes {
        for &up in &cfg.ablate_upsampling {
            for &variant in &cfg.ablate_variants {
                let mut row = AblationRow {
                    input_size: size,
                    upsampling: up,
                    variant,
                    result: Err(String::new()),
                };
                let dir = out.join("cells").join(row.label());
                let result = (|| -> Result<EvalSummary> {
                    let c = cell_config(cfg, size, up, variant)?;
                    if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(size) {
                        e.insert((resized(&train, size)?, resized(&val, size)?, resized(&test, size)?));
                    }
                    let (tr, va, te) = &cache[&size];
                    let outcome = train_on(&c, tr, va, &dir, &TrainOptions::default())?;
                    let summary = evaluate(&outcome.model, te, c.batch_size)?;
                    write_text(&dir.join("eval_report.txt"), &summary.to_text())?;
                    Ok(summary)
                })();
                if let Err(e) = &result {
                    log::warn!("ablation cell {} failed: {e}", row.label());
                }
                row.result = result.map_err(|e| e.to_string());
                rows.push(row);
            }
        }
    }
    let n = cfg.model.num_classes;
    let table = out.join("ablation_table.txt");
    let tsv = out.join("ablation.tsv");
    write_text(&table, &render_ablation_table(&rows, n))?;
    write_text(&tsv, &structured(&rows, n))?;
    write_run_manifest(&out, "ablate", cfg, &[table, tsv])?;
    Ok(rows)
}
