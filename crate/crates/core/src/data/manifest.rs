//! Dataset manifest: tab-separated `image, mask, split` rows plus `#`
//! metadata lines, and the seeded train/val/test split.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{class_name, read_image, read_mask, ImageTile, MaskTile, PALETTE, PALETTE_NAMES};
use crate::error::{Error, Result};
use crate::kv;
use crate::tensor::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub image: PathBuf,
    pub mask: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    pub tile_size: usize,
    /// Target per-class pixel fractions.
    pub fractions: Vec<f64>,
    /// Realized pooled fractions over every mask, when known.
    pub realized: Option<Vec<f64>>,
}

/// Item counts per split: rounded shares, then every split is given at
/// least one item by taking from the largest.
pub fn split_counts(n: usize, percent: [u32; 3]) -> Result<[usize; 3]> {
    if percent.iter().sum::<u32>() != 100 {
        return Err(Error::Config(format!(
            "split percentages {percent:?} do not sum to 100"
        )));
    }
    if n < 3 {
        return Err(Error::Config(format!("{n} items cannot fill three splits")));
    }
    let train = ((n * percent[0] as usize) as f64 / 100.0).round() as usize;
    let val = ((n * percent[1] as usize) as f64 / 100.0).round() as usize;
    let mut counts = [train.min(n), val.min(n - train.min(n)), 0];
    counts[2] = n - counts[0] - counts[1];
    for i in 0..3 {
        if counts[i] == 0 {
            let largest = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            counts[largest] -= 1;
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Seeded uniform shuffle, then contiguous train/val/test assignment.
pub fn split_assignments(n: usize, percent: [u32; 3], rng: &mut Rng) -> Result<Vec<Split>> {
    let counts = split_counts(n, percent)?;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut tags = vec![Split::Train; n];
    for (pos, &item) in order.iter().enumerate() {
        tags[item] = if pos < counts[0] {
            Split::Train
        } else if pos < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(tags)
}

/// Copy of `manifest` with fresh split tags.
pub fn split_dataset(manifest: &DatasetManifest, percent: [u32; 3], rng: &mut Rng) -> Result<DatasetManifest> {
    let tags = split_assignments(manifest.entries.len(), percent, rng)?;
    let mut out = manifest.clone();
    out.entries.iter_mut().zip(tags).for_each(|(e, t)| e.split = t);
    Ok(out)
}

const HEADER: &str = "image\tmask\tsplit";

impl DatasetManifest {
    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            for p in [&e.image, &e.mask] {
                if !seen.insert(p.clone()) {
                    return Err(Error::Validation(format!("path {} listed twice", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut meta = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("tile_size".to_string(), self.tile_size.to_string()),
            ("fractions".to_string(), kv::join(&self.fractions)),
        ];
        if let Some(r) = &self.realized {
            let rounded: Vec<String> = r.iter().map(|f| format!("{f:.4}")).collect();
            meta.push(("realized".to_string(), rounded.join(",")));
        }
        let legend: Vec<String> = (0..PALETTE.len())
            .map(|c| {
                let [r, g, b] = PALETTE[c];
                format!("{}={}({r},{g},{b})", class_name(c), PALETTE_NAMES[c])
            })
            .collect();
        meta.push(("palette".to_string(), legend.join(",")));
        let mut out = String::from("# dataset manifest\n");
        for (k, v) in meta {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.image.display(), e.mask.display(), e.split));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut meta = String::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for line in text.lines() {
            let start = offset;
            offset += line.len() + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if rest.contains('=') {
                    meta.push_str(rest);
                    meta.push('\n');
                }
                continue;
            }
            if line.trim().is_empty() || line == HEADER {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Parse {
                    offset: start,
                    msg: format!("expected 3 tab-separated columns, got {}", cols.len()),
                });
            }
            entries.push(ManifestEntry {
                image: cols[0].into(),
                mask: cols[1].into(),
                split: cols[2].parse()?,
            });
        }
        let map = kv::parse(&meta)?;
        let missing = |k: &str| Error::Config(format!("manifest is missing `{k}`"));
        let m = DatasetManifest {
            entries,
            seed: kv::get_parsed(&map, "seed")?.ok_or_else(|| missing("seed"))?,
            tile_size: kv::get_parsed(&map, "tile_size")?.ok_or_else(|| missing("tile_size"))?,
            fractions: kv::get_list(&map, "fractions")?.ok_or_else(|| missing("fractions"))?,
            realized: kv::get_list(&map, "realized")?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Tile pairs of one split, loaded into memory.
#[derive(Debug, Clone, Default)]
pub struct TileSet {
    pub images: Vec<ImageTile>,
    pub masks: Vec<MaskTile>,
}

impl TileSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn push(&mut self, img: ImageTile, mask: MaskTile) -> Result<()> {
        super::check_pair(&img, &mask)?;
        self.images.push(img);
        self.masks.push(mask);
        Ok(())
    }

    /// Reads every entry of `split`, paths resolved against `root`.
    pub fn load(manifest: &DatasetManifest, root: &Path, split: Split, num_classes: usize) -> Result<Self> {
        let mut set = TileSet::default();
        for e in manifest.split(split) {
            set.push(
                read_image(root.join(&e.image))?,
                read_mask(root.join(&e.mask), num_classes)?,
            )?;
        }
        Ok(set)
    }

    /// First `n` tiles.
    pub fn take(&self, n: usize) -> TileSet {
        TileSet {
            images: self.images.iter().take(n).cloned().collect(),
            masks: self.masks.iter().take(n).cloned().collect(),
        }
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<Vec<u64>> {
        self.masks.iter().map(|m| m.class_counts(num_classes)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        assert_eq!(split_counts(100, [75, 15, 10]).unwrap(), [75, 15, 10]);
        assert_eq!(split_counts(7, [75, 15, 10]).unwrap(), [5, 1, 1]);
        assert_eq!(split_counts(3, [75, 15, 10]).unwrap(), [1, 1, 1]);
        assert!(split_counts(2, [75, 15, 10]).is_err());
        assert!(split_counts(10, [70, 15, 10]).is_err());
    }

    #[test]
    fn same_seed_same_split() {
        let a = split_assignments(20, [75, 15, 10], &mut Rng::new(5)).unwrap();
        let b = split_assignments(20, [75, 15, 10], &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_roundtrip() {
        let m = DatasetManifest {
            entries: vec![ManifestEntry {
                image: "images/a.ppm".into(),
                mask: "masks/a.pgm".into(),
                split: Split::Val,
            }],
            seed: 7,
            tile_size: 64,
            fractions: vec![0.25; 4],
            realized: None,
        };
        let back = DatasetManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn duplicate_paths_rejected() {
        let text = "# seed = 1\n# tile_size = 8\n# fractions = 1,0,0,0\na\tb\ttrain\na\tc\ttest\n";
        assert!(matches!(DatasetManifest::from_text(text), Err(Error::Validation(_))));
    }
}
