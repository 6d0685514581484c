//! The synth / train / eval / predict / ablate commands, their config
//! file, logs and run manifests.

mod ablate;
mod config;
mod eval;
mod predict;
mod synth;
mod train;

pub use ablate::{render_ablation_table, run_ablate, AblationRow};
pub use config::{Profile, RunConfig, OUTPUT_ROOT_ENV};
pub use eval::{evaluate, majority_baseline, run_eval, ConstantSegmenter, Segmenter};
pub use predict::{predict_with, run_predict, Prediction};
pub use synth::{run_synth, synthesize};
pub use train::{run_train, train_on, TrainOptions, TrainOutcome};

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kv;

pub const RUN_MANIFEST: &str = "run_manifest.txt";
pub const DATASET_MANIFEST: &str = "manifest.tsv";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `run_manifest.txt` in `dir`: the command, the full config and a
/// SHA-256 per artifact (paths relative to `dir`). The file is itself a
/// loadable config.
pub fn write_run_manifest(dir: &Path, command: &str, cfg: &RunConfig, artifacts: &[PathBuf]) -> Result<PathBuf> {
    let mut pairs = vec![("command".to_string(), command.to_string())];
    pairs.extend(cfg.to_pairs());
    for a in artifacts {
        let rel = a.strip_prefix(dir).unwrap_or(a);
        pairs.push((format!("artifact.{}", rel.display()), sha256_file(a)?));
    }
    let path = dir.join(RUN_MANIFEST);
    write_text(&path, &kv::render(&pairs))?;
    Ok(path)
}

/// Append-only run log, one `timestamp<TAB>key<TAB>value` line per event.
/// Timestamps are logical (`epoch.step`) so identical runs give identical
/// bytes.
pub struct RunLog {
    file: File,
    pub path: PathBuf,
}

impl RunLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RunLog {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn record(&mut self, epoch: usize, step: usize, key: &str, value: impl std::fmt::Display) -> Result<()> {
        writeln!(self.file, "{epoch}.{step}\t{key}\t{value}").map_err(|e| Error::io(&self.path, e))
    }
}

/// One parsed log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub epoch: usize,
    pub step: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_log(text: &str) -> Result<Vec<LogEntry>> {
    let mut offset = 0;
    let mut out = Vec::new();
    for line in text.lines() {
        let start = offset;
        offset += line.len() + 1;
        let bad = |msg: &str| Error::Parse {
            offset: start,
            msg: msg.to_string(),
        };
        let mut cols = line.splitn(3, '\t');
        let (ts, key, value) = match (cols.next(), cols.next(), cols.next()) {
            (Some(t), Some(k), Some(v)) => (t, k, v),
            _ => return Err(bad("expected timestamp, key and value")),
        };
        let (e, s) = ts.split_once('.').ok_or_else(|| bad("timestamp is not epoch.step"))?;
        out.push(LogEntry {
            epoch: e.parse().map_err(|_| bad("bad epoch"))?,
            step: s.parse().map_err(|_| bad("bad step"))?,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_lines_parse() {
        let entries = parse_log("0.0\tstart\tseed=1\n3.8\ttrain_dice_loss\t0.5\n").unwrap();
        assert_eq!(entries[1].epoch, 3);
        assert_eq!(entries[1].value, "0.5");
        assert!(parse_log("oops\n").is_err());
    }
}
