//! Procedural benthic tiles: smooth region partitions for the mask and
//! class-conditional color/texture models for the image.

use super::{ImageTile, MaskTile, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::tensor::Rng;

/// Pixel composition of the reference survey: sand, coral, algae, rock.
pub const SURVEY_FRACTIONS: [f64; NUM_CLASSES] = [0.48, 0.23, 0.12, 0.17];

/// Base color, per-pixel noise amplitude, and texture amplitude/frequency
/// for each class. Coral and algae share a hue band and differ mostly in
/// texture.
const CLASS_LOOKS: [ClassLook; NUM_CLASSES] = [
    ClassLook {
        base: [214, 196, 150],
        grain: 6.0,
        texture: 8.0,
        cells: 12.0,
    },
    ClassLook {
        base: [150, 112, 104],
        grain: 14.0,
        texture: 45.0,
        cells: 20.0,
    },
    ClassLook {
        base: [118, 128, 86],
        grain: 14.0,
        texture: 30.0,
        cells: 7.0,
    },
    ClassLook {
        base: [82, 84, 90],
        grain: 5.0,
        texture: 10.0,
        cells: 6.0,
    },
];

#[derive(Clone, Copy)]
struct ClassLook {
    base: [u8; 3],
    grain: f32,
    texture: f32,
    cells: f32,
}

/// Smooth random field on the unit square from bilinearly interpolated
/// lattice values (smoothstep weights).
struct ValueNoise {
    cells: usize,
    lattice: Vec<f32>,
}

impl ValueNoise {
    fn new(rng: &mut Rng, cells: usize) -> Self {
        let n = (cells + 1) * (cells + 1);
        ValueNoise {
            cells,
            lattice: (0..n).map(|_| rng.uniform()).collect(),
        }
    }

    /// `u, v` in `[0, 1]`.
    fn at(&self, u: f32, v: f32) -> f32 {
        let g = self.cells as f32;
        let (x, y) = (u * g, v * g);
        let (x0, y0) = (
            (x.floor() as usize).min(self.cells - 1),
            (y.floor() as usize).min(self.cells - 1),
        );
        let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(x - x0 as f32), smooth(y - y0 as f32));
        let stride = self.cells + 1;
        let l = |i: usize, j: usize| self.lattice[j * stride + i];
        let top = l(x0, y0) * (1.0 - tx) + l(x0 + 1, y0) * tx;
        let bot = l(x0, y0 + 1) * (1.0 - tx) + l(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

/// Sum of octaves sampled on an `size×size` grid.
fn fractal_field(rng: &mut Rng, size: usize, base_cells: usize, octaves: usize) -> Vec<f32> {
    let layers: Vec<(ValueNoise, f32)> = (0..octaves)
        .map(|o| (ValueNoise::new(rng, base_cells << o), 0.5f32.powi(o as i32)))
        .collect();
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (u, v) = ((x as f32 + 0.5) / size as f32, (y as f32 + 0.5) / size as f32);
            out[y * size + x] = layers.iter().map(|(n, a)| a * n.at(u, v)).sum();
        }
    }
    out
}

pub fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.len() != NUM_CLASSES {
        return Err(Error::Config(format!(
            "expected {NUM_CLASSES} class fractions, got {}",
            fractions.len()
        )));
    }
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Config(format!(
            "class fractions must be non-negative: {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("class fractions sum to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TileGenerator {
    pub size: usize,
    pub fractions: Vec<f64>,
    /// Probability of a shadow patch and, independently, of a blurred patch.
    pub artifact_prob: f32,
}

impl TileGenerator {
    pub fn new(size: usize, fractions: &[f64]) -> Result<Self> {
        validate_fractions(fractions)?;
        if size < 4 {
            return Err(Error::Config(format!("tile size {size} is too small")));
        }
        Ok(TileGenerator {
            size,
            fractions: fractions.to_vec(),
            artifact_prob: 0.3,
        })
    }

    pub fn generate(&self, rng: &mut Rng) -> (ImageTile, MaskTile) {
        let mask = self.generate_mask(rng);
        let image = self.render(rng, &mask);
        (image, mask)
    }

    /// Label = argmax over per-class smooth fields plus per-class offsets;
    /// the offsets are tuned so realized fractions approach the targets.
    fn generate_mask(&self, rng: &mut Rng) -> MaskTile {
        let n = self.size;
        let active: Vec<usize> = (0..NUM_CLASSES).filter(|&c| self.fractions[c] > 0.0).collect();
        let fields: Vec<Vec<f32>> = active.iter().map(|_| fractal_field(rng, n, 3, 2)).collect();
        let mut bias = vec![0.0f32; active.len()];
        let assign = |bias: &[f32]| -> Vec<u8> {
            (0..n * n)
                .map(|p| {
                    let mut best = 0;
                    for k in 1..active.len() {
                        if fields[k][p] + bias[k] > fields[best][p] + bias[best] {
                            best = k;
                        }
                    }
                    active[best] as u8
                })
                .collect()
        };
        let mut best_labels = assign(&bias);
        let mut best_err = f64::INFINITY;
        for _ in 0..40 {
            let labels = assign(&bias);
            let mut counts = [0usize; NUM_CLASSES];
            labels.iter().for_each(|&l| counts[l as usize] += 1);
            let mut err = 0.0f64;
            for (k, &c) in active.iter().enumerate() {
                let diff = self.fractions[c] - counts[c] as f64 / (n * n) as f64;
                err = err.max(diff.abs());
                bias[k] += 0.8 * diff as f32;
            }
            if err < best_err {
                best_err = err;
                best_labels = labels;
            }
            if err < 0.01 {
                break;
            }
        }
        MaskTile {
            height: n,
            width: n,
            labels: best_labels,
        }
    }

    fn render(&self, rng: &mut Rng, mask: &MaskTile) -> ImageTile {
        let n = self.size;
        let textures: Vec<Vec<f32>> = CLASS_LOOKS
            .iter()
            .map(|l| fractal_field(rng, n, l.cells as usize, 2))
            .collect();
        let illumination = fractal_field(rng, n, 2, 1);
        let tint: Vec<f32> = (0..3).map(|_| rng.range(-10.0, 10.0)).collect();
        let mut shade = vec![1.0f32; n * n];
        if rng.bernoulli(self.artifact_prob) {
            let (cy, cx) = (rng.range(0.0, n as f32), rng.range(0.0, n as f32));
            let (ry, rx) = (rng.range(0.1, 0.3) * n as f32, rng.range(0.1, 0.3) * n as f32);
            let depth = rng.range(0.45, 0.7);
            for y in 0..n {
                for x in 0..n {
                    let d = ((y as f32 - cy) / ry).powi(2) + ((x as f32 - cx) / rx).powi(2);
                    if d < 1.0 {
                        shade[y * n + x] = depth + (1.0 - depth) * d;
                    }
                }
            }
        }
        let mut pixels = Vec::with_capacity(n * n * 3);
        for p in 0..n * n {
            let c = mask.labels[p] as usize;
            let look = CLASS_LOOKS[c];
            let tex = (textures[c][p] - 0.75) * look.texture;
            let light = 0.85 + 0.3 * illumination[p];
            for (&base, &t) in look.base.iter().zip(&tint) {
                let v = (base as f32 + tex + t + look.grain * rng.normal()) * light * shade[p];
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        let mut img = ImageTile {
            height: n,
            width: n,
            pixels,
        };
        if rng.bernoulli(self.artifact_prob) {
            let side = (n / 4).max(2);
            let y0 = rng.below(n - side + 1);
            let x0 = rng.below(n - side + 1);
            box_blur(&mut img, y0, x0, side, 2);
        }
        img
    }
}

/// In-place box blur of a `side×side` patch with the given radius.
fn box_blur(img: &mut ImageTile, y0: usize, x0: usize, side: usize, radius: usize) {
    let src = img.clone();
    let (h, w) = (img.height as isize, img.width as isize);
    let r = radius as isize;
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            let mut acc = [0u32; 3];
            let mut cnt = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    if yy >= 0 && yy < h && xx >= 0 && xx < w {
                        let p = src.rgb(yy as usize, xx as usize);
                        (0..3).for_each(|c| acc[c] += p[c] as u32);
                        cnt += 1;
                    }
                }
            }
            img.set_rgb(y, x, acc.map(|a| ((a + cnt / 2) / cnt) as u8));
        }
    }
}

/// One tile pair of side `size` with composition close to `fractions`.
pub fn generate_synthetic_tile(rng: &mut Rng, fractions: &[f64], size: usize) -> Result<(ImageTile, MaskTile)> {
    Ok(TileGenerator::new(size, fractions)?.generate(rng))
}
