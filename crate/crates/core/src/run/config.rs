use std::path::{Path, PathBuf};

use crate::data::{validate_fractions, AbundanceBand, AugmentationConfig, SURVEY_FRACTIONS};
use crate::error::{Error, Result};
use crate::kv::{self, KvMap};
use crate::model::{ModelConfig, Upsampling, Variant};

/// Environment variable under which relative output directories are placed.
pub const OUTPUT_ROOT_ENV: &str = "BENTHIQ_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// C=24, depths {2,2,2,2}, M=4, 128×128, batch 4.
    Desk,
    /// Swin-T at 224×224, batch 24, 500 epochs. Long-running.
    Full,
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        })
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::Config(format!("unknown profile `{s}` (desk|full)"))),
        }
    }
}

/// Everything a command needs, read from a flat `key = value` file plus
/// overrides. The learning rate has no default and must be stated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: Profile,
    pub model: ModelConfig,
    pub augment: AugmentationConfig,
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Use stratified (abundance-band) batches.
    pub stratify: bool,
    pub band: AbundanceBand,
    /// Rejections allowed per epoch before the sampler gives up.
    pub max_attempts: usize,
    /// Train on only the first `n` training tiles.
    pub train_limit: Option<usize>,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub synth_tiles: usize,
    pub synth_fractions: Vec<f64>,
    pub split_percent: [u32; 3],
    pub ablate_input_sizes: Vec<usize>,
    pub ablate_upsampling: Vec<Upsampling>,
    pub ablate_variants: Vec<Variant>,
}

impl RunConfig {
    /// Profile defaults with the given learning rate.
    pub fn profile(profile: Profile, lr: f32) -> Self {
        let (model, batch_size, epochs) = match profile {
            Profile::Desk => (ModelConfig::desk(), 4, 200),
            Profile::Full => (ModelConfig::swin_t(), 24, 500),
        };
        let tile = model.input_size;
        RunConfig {
            profile,
            model,
            augment: AugmentationConfig::default(),
            lr,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs,
            batch_size,
            seed: 1234,
            stratify: true,
            band: AbundanceBand::default(),
            max_attempts: 200,
            train_limit: None,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
            synth_tiles: 100,
            synth_fractions: SURVEY_FRACTIONS.to_vec(),
            split_percent: [75, 15, 10],
            ablate_input_sizes: vec![tile, 2 * tile],
            ablate_upsampling: vec![Upsampling::PatchSplit, Upsampling::Bicubic],
            ablate_variants: vec![Variant::SwinTMini, Variant::SwinBMini],
        }
    }

    pub fn desk(lr: f32) -> Self {
        Self::profile(Profile::Desk, lr)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&kv::parse(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Applies `key=value` overrides on top of `text`.
    pub fn from_text_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = kv::parse(text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &KvMap) -> Result<Self> {
        for k in map.keys() {
            if !is_known_key(k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
        }
        let profile = kv::get_parsed(map, "profile")?.unwrap_or(Profile::Desk);
        let lr = kv::get_parsed(map, "lr")?
            .ok_or_else(|| Error::Config("`lr` must be set explicitly (0.01 is the desk-scale choice)".into()))?;
        let mut c = Self::profile(profile, lr);
        c.model = ModelConfig::from_map(map, c.model)?;
        c.augment = AugmentationConfig::from_map(map, c.augment)?;
        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = kv::get_parsed(map, $key)? {
                    $field = v;
                }
            };
        }
        set!(c.momentum, "momentum");
        set!(c.weight_decay, "weight_decay");
        set!(c.epochs, "epochs");
        set!(c.batch_size, "batch_size");
        set!(c.seed, "seed");
        set!(c.stratify, "stratify");
        set!(c.band.lo, "band.lo");
        set!(c.band.hi, "band.hi");
        set!(c.max_attempts, "max_attempts");
        set!(c.data_dir, "data_dir");
        set!(c.out_dir, "out_dir");
        set!(c.synth_tiles, "synth.tiles");
        match map.get("train_limit").map(String::as_str) {
            None | Some("all") => {}
            Some(_) => c.train_limit = kv::get_parsed(map, "train_limit")?,
        }
        if let Some(v) = kv::get_list(map, "synth.fractions")? {
            c.synth_fractions = v;
        }
        if let Some(v) = kv::get_list::<u32>(map, "split")? {
            c.split_percent = v
                .try_into()
                .map_err(|_| Error::Config("`split` needs three percentages".into()))?;
        }
        if let Some(v) = kv::get_list(map, "ablate.input_sizes")? {
            c.ablate_input_sizes = v;
        }
        if let Some(v) = kv::get_list(map, "ablate.upsampling")? {
            c.ablate_upsampling = v;
        }
        if let Some(v) = kv::get_list(map, "ablate.variants")? {
            c.ablate_variants = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        validate_fractions(&self.synth_fractions)?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.band.lo > self.band.hi {
            return Err(Error::Config(format!(
                "empty abundance band [{}, {}]",
                self.band.lo, self.band.hi
            )));
        }
        if self.split_percent.iter().sum::<u32>() != 100 {
            return Err(Error::Config(format!(
                "split {:?} does not sum to 100",
                self.split_percent
            )));
        }
        Ok(())
    }

    /// Every setting, explicitly.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = |k: &str, v: String| (k.to_string(), v);
        let mut out = vec![
            p("profile", self.profile.to_string()),
            p("lr", self.lr.to_string()),
            p("momentum", self.momentum.to_string()),
            p("weight_decay", self.weight_decay.to_string()),
            p("epochs", self.epochs.to_string()),
            p("batch_size", self.batch_size.to_string()),
            p("seed", self.seed.to_string()),
            p("stratify", self.stratify.to_string()),
            p("band.lo", self.band.lo.to_string()),
            p("band.hi", self.band.hi.to_string()),
            p("max_attempts", self.max_attempts.to_string()),
            p("train_limit", self.train_limit.map_or("all".into(), |n| n.to_string())),
            p("data_dir", self.data_dir.display().to_string()),
            p("out_dir", self.out_dir.display().to_string()),
            p("synth.tiles", self.synth_tiles.to_string()),
            p("synth.fractions", kv::join(&self.synth_fractions)),
            p("split", kv::join(&self.split_percent)),
            p("ablate.input_sizes", kv::join(&self.ablate_input_sizes)),
            p("ablate.upsampling", kv::join(&self.ablate_upsampling)),
            p("ablate.variants", kv::join(&self.ablate_variants)),
        ];
        out.extend(self.model.to_pairs());
        out.extend(self.augment.to_pairs());
        out
    }

    pub fn to_text(&self) -> String {
        kv::render(&self.to_pairs())
    }

    /// `out_dir`, placed under `$BENTHIQ_OUTPUT_ROOT` when that is set and
    /// the path is relative.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output(&self.out_dir)
    }

    /// `data_dir`, resolved like [`Self::output_dir`].
    pub fn data_path(&self) -> PathBuf {
        resolve_output(&self.data_dir)
    }
}

pub(crate) fn resolve_output(p: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if p.is_relative() && !root.is_empty() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}

fn is_known_key(k: &str) -> bool {
    const PLAIN: [&str; 19] = [
        "profile",
        "lr",
        "momentum",
        "weight_decay",
        "epochs",
        "batch_size",
        "seed",
        "stratify",
        "band.lo",
        "band.hi",
        "max_attempts",
        "train_limit",
        "data_dir",
        "out_dir",
        "synth.tiles",
        "synth.fractions",
        "split",
        "command",
        "ablate.input_sizes",
    ];
    PLAIN.contains(&k)
        || ["ablate.", "model.", "augment.", "artifact."]
            .iter()
            .any(|p| k.starts_with(p))
}
