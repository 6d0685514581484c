use super::{ModelConfig, Upsampling};
use crate::data::{ImageTile, MaskTile};
use crate::error::{dim_err, Result};
use crate::swin::{BicubicUpsample, FeatureMap, Linear, PatchEmbed, PatchMerge, PatchSplit, SwinBlock, Upsample};
use crate::tensor::{no_grad, ParamStore, Rng, Tensor};

/// Unnormalized class scores `[batch, H, W, N]`.
#[derive(Debug, Clone)]
pub struct Logits {
    pub tensor: Tensor,
}

impl Logits {
    pub fn batch(&self) -> usize {
        self.tensor.shape()[0]
    }
    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }
    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }
    pub fn classes(&self) -> usize {
        self.tensor.shape()[3]
    }

    /// Per-pixel argmax; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<MaskTile> {
        let (h, w, n) = (self.height(), self.width(), self.classes());
        self.tensor
            .data()
            .chunks(h * w * n)
            .map(|img| {
                let labels = img
                    .chunks(n)
                    .map(|px| {
                        let mut best = 0;
                        for c in 1..n {
                            if px[c] > px[best] {
                                best = c;
                            }
                        }
                        best as u8
                    })
                    .collect();
                MaskTile {
                    height: h,
                    width: w,
                    labels,
                }
            })
            .collect()
    }
}

/// One entry of the dimension chain recorded during a traced forward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageShape {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    /// Replace the encoder features fed to every skip connection by zeros.
    pub zero_skips: bool,
}

#[derive(Debug, Clone)]
struct DecoderStage {
    upsample: Upsample,
    fuse: Linear,
    blocks: Vec<SwinBlock>,
}

/// The U-shaped encoder / bottleneck / decoder network.
#[derive(Debug, Clone)]
pub struct BenthiqNet {
    pub config: ModelConfig,
    pub params: ParamStore,
    embed: PatchEmbed,
    encoder: Vec<Vec<SwinBlock>>,
    merges: Vec<PatchMerge>,
    bottleneck: Vec<SwinBlock>,
    decoder: Vec<DecoderStage>,
    final_ups: Vec<Upsample>,
    head: Linear,
}

#[allow(clippy::too_many_arguments)]
fn blocks(
    store: &mut ParamStore,
    rng: &mut Rng,
    cfg: &ModelConfig,
    name: &str,
    depth: usize,
    dim: usize,
    heads: usize,
    res: usize,
) -> Result<Vec<SwinBlock>> {
    (0..depth)
        .map(|j| {
            let shift = SwinBlock::default_shift(j % 2 == 1, cfg.window_size, (res, res));
            SwinBlock::new(
                store,
                rng,
                &format!("{name}.block{j}"),
                dim,
                heads,
                cfg.window_size,
                (res, res),
                shift,
                cfg.mlp_ratio,
                cfg.position_bias,
            )
        })
        .collect()
}

fn upsample(store: &mut ParamStore, rng: &mut Rng, cfg: &ModelConfig, name: &str, dim: usize) -> Result<Upsample> {
    Ok(match cfg.upsampling {
        Upsampling::PatchSplit => Upsample::PatchSplit(PatchSplit::new(store, rng, name, dim)?),
        Upsampling::Bicubic => Upsample::Bicubic(BicubicUpsample::new(store, rng, name, dim)?),
    })
}

impl BenthiqNet {
    /// Builds the network with fresh parameters drawn from `rng`.
    pub fn build(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let cfg = config;
        let mut store = ParamStore::new();
        let s = &mut store;
        let c = cfg.embed_dim;
        let embed = PatchEmbed::new(s, rng, "encoder.patch_embed", cfg.patch_size, c)?;
        let mut encoder = Vec::new();
        let mut merges = Vec::new();
        for i in 0..4 {
            let name = format!("encoder.stage{i}");
            encoder.push(blocks(
                s,
                rng,
                cfg,
                &name,
                cfg.depths[i],
                cfg.stage_channels(i),
                cfg.heads[i],
                cfg.stage_resolution(i),
            )?);
            if i < 3 {
                merges.push(PatchMerge::new(
                    s,
                    rng,
                    &format!("{name}.merge"),
                    cfg.stage_channels(i),
                )?);
            }
        }
        let bottleneck = blocks(
            s,
            rng,
            cfg,
            "bottleneck",
            2,
            cfg.stage_channels(3),
            cfg.heads[3],
            cfg.stage_resolution(3),
        )?;
        let mut decoder = Vec::new();
        for i in (0..3).rev() {
            let name = format!("decoder.stage{i}");
            let dim = cfg.stage_channels(i);
            decoder.push(DecoderStage {
                upsample: upsample(s, rng, cfg, &format!("{name}.upsample"), 2 * dim)?,
                fuse: Linear::new(s, rng, &format!("{name}.fuse"), 2 * dim, dim, true)?,
                blocks: blocks(
                    s,
                    rng,
                    cfg,
                    &name,
                    cfg.depths[i],
                    dim,
                    cfg.heads[i],
                    cfg.stage_resolution(i),
                )?,
            });
        }
        let final_ups = vec![
            upsample(s, rng, cfg, "decoder.final_up0", c)?,
            upsample(s, rng, cfg, "decoder.final_up1", c / 2)?,
        ];
        let head = Linear::new(s, rng, "decoder.head", c / 4, cfg.num_classes, true)?;
        Ok(BenthiqNet {
            config: cfg.clone(),
            params: store,
            embed,
            encoder,
            merges,
            bottleneck,
            decoder,
            final_ups,
            head,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn forward(&self, images: &Tensor) -> Result<Logits> {
        self.forward_with(images, ForwardOptions::default(), None)
    }

    /// Forward pass recording the dimension chain.
    pub fn forward_traced(&self, images: &Tensor) -> Result<(Logits, Vec<StageShape>)> {
        let mut trace = Vec::new();
        let logits = self.forward_with(images, ForwardOptions::default(), Some(&mut trace))?;
        Ok((logits, trace))
    }

    pub fn forward_with(
        &self,
        images: &Tensor,
        opts: ForwardOptions,
        mut trace: Option<&mut Vec<StageShape>>,
    ) -> Result<Logits> {
        let s = images.shape();
        let n = self.config.input_size;
        if s.len() != 4 || s[1] != n || s[2] != n || s[3] != 3 {
            return Err(dim_err!("model expects images [batch, {n}, {n}, 3], got {s:?}"));
        }
        let p = &self.params;
        let mut record = |name: &str, f: &FeatureMap| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(StageShape {
                    name: name.to_string(),
                    height: f.height,
                    width: f.width,
                    channels: f.channels,
                });
            }
        };
        let mut x = self.embed.forward(p, images)?;
        record("embed", &x);
        let mut skips = Vec::new();
        for i in 0..4 {
            for b in &self.encoder[i] {
                x = b.forward(p, &x)?;
            }
            record(&format!("encoder.stage{i}"), &x);
            if i < 3 {
                skips.push(x.clone());
                x = self.merges[i].forward(p, &x)?;
                record(&format!("encoder.merge{i}"), &x);
            }
        }
        for b in &self.bottleneck {
            x = b.forward(p, &x)?;
        }
        record("bottleneck", &x);
        for (k, stage) in self.decoder.iter().enumerate() {
            let i = 2 - k;
            x = stage.upsample.forward(p, &x)?;
            record(&format!("decoder.up{i}"), &x);
            let skip = &skips[i];
            let skip_data = if opts.zero_skips {
                Tensor::zeros(skip.data.shape())
            } else {
                skip.data.clone()
            };
            let fused = Tensor::concat(&[&x.data, &skip_data], -1)?;
            x = x.with_data(stage.fuse.forward(p, &fused)?)?;
            for b in &stage.blocks {
                x = b.forward(p, &x)?;
            }
            record(&format!("decoder.stage{i}"), &x);
        }
        for (k, up) in self.final_ups.iter().enumerate() {
            x = up.forward(p, &x)?;
            record(&format!("decoder.final_up{k}"), &x);
        }
        let out = self.head.forward(p, &x.data)?;
        let logits = out.reshape(&[x.batch, x.height, x.width, self.config.num_classes])?;
        if let Some(t) = trace {
            t.push(StageShape {
                name: "head".into(),
                height: x.height,
                width: x.width,
                channels: self.config.num_classes,
            });
        }
        Ok(Logits { tensor: logits })
    }

    /// Inference on tiles: argmax masks, lowest class index on ties.
    pub fn predict_masks(&self, images: &[&ImageTile]) -> Result<Vec<MaskTile>> {
        no_grad(|| {
            let x = ImageTile::batch_tensor(images)?;
            Ok(self.forward(&x)?.argmax())
        })
    }

    pub fn predict_mask(&self, image: &ImageTile) -> Result<MaskTile> {
        Ok(self.predict_masks(&[image])?.remove(0))
    }
}
