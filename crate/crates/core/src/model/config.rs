use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::{self, KvMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upsampling {
    PatchSplit,
    Bicubic,
}

impl fmt::Display for Upsampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Upsampling::PatchSplit => "patch_split",
            Upsampling::Bicubic => "bicubic",
        })
    }
}

impl FromStr for Upsampling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patch_split" => Ok(Upsampling::PatchSplit),
            "bicubic" => Ok(Upsampling::Bicubic),
            _ => Err(Error::Config(format!("unknown upsampling `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    SwinT,
    SwinB,
    SwinTMini,
    SwinBMini,
    Custom,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::SwinT => "swin_t",
            Variant::SwinB => "swin_b",
            Variant::SwinTMini => "swin_t_mini",
            Variant::SwinBMini => "swin_b_mini",
            Variant::Custom => "custom",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swin_t" => Ok(Variant::SwinT),
            "swin_b" => Ok(Variant::SwinB),
            "swin_t_mini" => Ok(Variant::SwinTMini),
            "swin_b_mini" => Ok(Variant::SwinBMini),
            "custom" => Ok(Variant::Custom),
            _ => Err(Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub depths: Vec<usize>,
    pub heads: Vec<usize>,
    pub window_size: usize,
    pub patch_size: usize,
    pub num_classes: usize,
    pub input_size: usize,
    pub upsampling: Upsampling,
    pub variant: Variant,
    pub mlp_ratio: usize,
    pub position_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::swin_t()
    }
}

impl ModelConfig {
    /// C = 96, depths {2,2,6,2}, heads {3,6,12,24}, M = 7, 224 input.
    pub fn swin_t() -> Self {
        ModelConfig {
            embed_dim: 96,
            depths: vec![2, 2, 6, 2],
            heads: vec![3, 6, 12, 24],
            window_size: 7,
            patch_size: 4,
            num_classes: 4,
            input_size: 224,
            upsampling: Upsampling::PatchSplit,
            variant: Variant::SwinT,
            mlp_ratio: 4,
            position_bias: true,
        }
    }

    /// C = 128, depths {2,2,6,2}, heads {4,8,16,32}.
    pub fn swin_b() -> Self {
        ModelConfig {
            embed_dim: 128,
            heads: vec![4, 8, 16, 32],
            variant: Variant::SwinB,
            ..Self::swin_t()
        }
    }

    /// Desk-scale profile: C = 24, depths {2,2,2,2}, M = 4, 128 input.
    pub fn desk() -> Self {
        ModelConfig {
            embed_dim: 24,
            depths: vec![2, 2, 2, 2],
            heads: vec![3, 6, 12, 24],
            window_size: 4,
            input_size: 128,
            variant: Variant::SwinTMini,
            ..Self::swin_t()
        }
    }

    /// Desk-scale analogue of Swin-B (C scaled by 4/3).
    pub fn desk_base() -> Self {
        ModelConfig {
            embed_dim: 32,
            heads: vec![4, 8, 16, 32],
            variant: Variant::SwinBMini,
            ..Self::desk()
        }
    }

    pub fn for_variant(variant: Variant) -> Result<Self> {
        match variant {
            Variant::SwinT => Ok(Self::swin_t()),
            Variant::SwinB => Ok(Self::swin_b()),
            Variant::SwinTMini => Ok(Self::desk()),
            Variant::SwinBMini => Ok(Self::desk_base()),
            Variant::Custom => Err(Error::Config("`custom` has no preset".into())),
        }
    }

    pub fn num_stages(&self) -> usize {
        self.depths.len()
    }

    /// Channel count of encoder stage `i`: `C·2^i`.
    pub fn stage_channels(&self, i: usize) -> usize {
        self.embed_dim << i
    }

    /// Token-grid side length of encoder stage `i`.
    pub fn stage_resolution(&self, i: usize) -> usize {
        (self.input_size / self.patch_size) >> i
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.depths.len() != 4 || self.heads.len() != 4 {
            return bad(format!(
                "expected 4 stage depths and heads, got {:?} / {:?}",
                self.depths, self.heads
            ));
        }
        if let Some(d) = self.depths.iter().find(|&&d| d == 0 || d % 2 != 0) {
            return bad(format!("stage depth {d} is not a positive even number"));
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes {} must be at least 2", self.num_classes));
        }
        if self.patch_size == 0 || self.window_size == 0 || self.mlp_ratio == 0 {
            return bad("patch_size, window_size and mlp_ratio must be positive".into());
        }
        if !self.embed_dim.is_multiple_of(4) {
            return bad(format!(
                "embed_dim {} must be divisible by 4 for the final splitting steps",
                self.embed_dim
            ));
        }
        if !self.input_size.is_multiple_of(self.patch_size) {
            return bad(format!(
                "input size {} is not divisible by patch size {}",
                self.input_size, self.patch_size
            ));
        }
        for i in 0..4 {
            let res = (self.input_size / self.patch_size) as f64 / (1u64 << i) as f64;
            if res.fract() != 0.0 || !(res as usize).is_multiple_of(self.window_size) {
                return bad(format!(
                    "stage {i} resolution {res} (input {}) is not divisible by window size {}",
                    self.input_size, self.window_size
                ));
            }
            let c = self.stage_channels(i);
            if !c.is_multiple_of(self.heads[i]) {
                return bad(format!(
                    "stage {i}: {c} channels not divisible by {} heads",
                    self.heads[i]
                ));
            }
        }
        let tb = [2, 2, 6, 2];
        match self.variant {
            Variant::SwinT if self.embed_dim != 96 || self.depths != tb => {
                bad("swin_t requires C = 96 and depths {2,2,6,2}".into())
            }
            Variant::SwinB if self.embed_dim != 128 || self.depths != tb => {
                bad("swin_b requires C = 128 and depths {2,2,6,2}".into())
            }
            _ => Ok(()),
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = |k: &str, v: String| (k.to_string(), v);
        vec![
            p("model.variant", self.variant.to_string()),
            p("model.embed_dim", self.embed_dim.to_string()),
            p("model.depths", kv::join(&self.depths)),
            p("model.heads", kv::join(&self.heads)),
            p("model.window_size", self.window_size.to_string()),
            p("model.patch_size", self.patch_size.to_string()),
            p("model.num_classes", self.num_classes.to_string()),
            p("model.input_size", self.input_size.to_string()),
            p("model.upsampling", self.upsampling.to_string()),
            p("model.mlp_ratio", self.mlp_ratio.to_string()),
            p("model.position_bias", self.position_bias.to_string()),
        ]
    }

    /// Reads `model.*` keys; `model.variant` selects the preset that other
    /// keys override.
    pub fn from_map(map: &KvMap, base: ModelConfig) -> Result<Self> {
        let mut cfg = match kv::get_parsed::<Variant>(map, "model.variant")? {
            Some(Variant::Custom) => ModelConfig {
                variant: Variant::Custom,
                ..base
            },
            Some(v) => Self::for_variant(v)?,
            None => base,
        };
        if let Some(v) = kv::get_parsed(map, "model.embed_dim")? {
            cfg.embed_dim = v;
        }
        if let Some(v) = kv::get_list(map, "model.depths")? {
            cfg.depths = v;
        }
        if let Some(v) = kv::get_list(map, "model.heads")? {
            cfg.heads = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.window_size")? {
            cfg.window_size = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.patch_size")? {
            cfg.patch_size = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.num_classes")? {
            cfg.num_classes = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.input_size")? {
            cfg.input_size = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.upsampling")? {
            cfg.upsampling = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.mlp_ratio")? {
            cfg.mlp_ratio = v;
        }
        if let Some(v) = kv::get_parsed(map, "model.position_bias")? {
            cfg.position_bias = v;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ModelConfig::swin_t().validate().unwrap();
        ModelConfig::swin_b().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
        ModelConfig::desk_base().validate().unwrap();
    }

    #[test]
    fn odd_depth_rejected() {
        let cfg = ModelConfig {
            depths: vec![2, 3, 2, 2],
            ..ModelConfig::desk()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn indivisible_stage_names_resolution() {
        let cfg = ModelConfig {
            input_size: 96,
            ..ModelConfig::desk()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("stage 2") && msg.contains("resolution 6"), "{msg}");
    }

    #[test]
    fn swin_b_pins_width() {
        let cfg = ModelConfig {
            embed_dim: 96,
            ..ModelConfig::swin_b()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pairs_roundtrip() {
        let cfg = ModelConfig {
            upsampling: Upsampling::Bicubic,
            variant: Variant::Custom,
            embed_dim: 16,
            ..ModelConfig::desk()
        };
        let text = kv::render(&cfg.to_pairs());
        let back = ModelConfig::from_map(&kv::parse(&text).unwrap(), ModelConfig::swin_t()).unwrap();
        assert_eq!(back, cfg);
    }
}
