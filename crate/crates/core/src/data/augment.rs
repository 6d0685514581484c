//! Training-time augmentation: right-angle rotation and flip, fine
//! rotation, RGB channel shift, contrast then brightness.
//!
//! Sampling ([`AugmentPlan::sample`]) is split from application
//! ([`AugmentPlan::apply`]) so each step can be exercised with fixed
//! parameters.

use super::{ImageTile, MaskTile};
use crate::error::Result;
use crate::kv::{self, KvMap};
use crate::tensor::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub right_angle: bool,
    pub flip_prob: f32,
    /// Fine rotation angle is drawn from `±fine_rotation_deg`.
    pub fine_rotation_deg: f32,
    /// Per-channel shift drawn from `±rgb_shift`.
    pub rgb_shift: f32,
    pub brightness: f32,
    pub contrast: f32,
    /// Gate probability of each step other than the flip.
    pub step_prob: f32,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            right_angle: true,
            flip_prob: 0.5,
            fine_rotation_deg: 20.0,
            rgb_shift: 20.0,
            brightness: 0.3,
            contrast: 0.3,
            step_prob: 0.5,
        }
    }
}

impl AugmentationConfig {
    /// Every step disabled.
    pub fn off() -> Self {
        AugmentationConfig {
            right_angle: false,
            flip_prob: 0.0,
            fine_rotation_deg: 0.0,
            rgb_shift: 0.0,
            brightness: 0.0,
            contrast: 0.0,
            step_prob: 0.0,
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("augment.right_angle", self.right_angle.to_string()),
            ("augment.flip_prob", self.flip_prob.to_string()),
            ("augment.fine_rotation_deg", self.fine_rotation_deg.to_string()),
            ("augment.rgb_shift", self.rgb_shift.to_string()),
            ("augment.brightness", self.brightness.to_string()),
            ("augment.contrast", self.contrast.to_string()),
            ("augment.step_prob", self.step_prob.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_map(map: &KvMap, base: AugmentationConfig) -> Result<Self> {
        let mut c = base;
        if let Some(v) = kv::get_parsed(map, "augment.right_angle")? {
            c.right_angle = v;
        }
        let floats: [(&str, &mut f32); 6] = [
            ("augment.flip_prob", &mut c.flip_prob),
            ("augment.fine_rotation_deg", &mut c.fine_rotation_deg),
            ("augment.rgb_shift", &mut c.rgb_shift),
            ("augment.brightness", &mut c.brightness),
            ("augment.contrast", &mut c.contrast),
            ("augment.step_prob", &mut c.step_prob),
        ];
        for (key, slot) in floats {
            if let Some(v) = kv::get_parsed(map, key)? {
                *slot = v;
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

/// Concrete parameters of one augmentation draw.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentPlan {
    /// Counter-clockwise quarter turns, 0..=3.
    pub quarter_turns: u8,
    pub flip: Option<FlipAxis>,
    /// Degrees, counter-clockwise.
    pub fine_rotation: Option<f32>,
    pub rgb_shift: Option<[i32; 3]>,
    /// `(contrast c, brightness b)`.
    pub contrast_brightness: Option<(f32, f32)>,
}

impl AugmentPlan {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn sample(cfg: &AugmentationConfig, rng: &mut Rng) -> Self {
        let mut plan = AugmentPlan::identity();
        if cfg.right_angle && rng.bernoulli(cfg.step_prob) {
            plan.quarter_turns = 1 + rng.below(3) as u8;
        }
        if rng.bernoulli(cfg.flip_prob) {
            plan.flip = Some(if rng.bernoulli(0.5) {
                FlipAxis::Horizontal
            } else {
                FlipAxis::Vertical
            });
        }
        if cfg.fine_rotation_deg > 0.0 && rng.bernoulli(cfg.step_prob) {
            plan.fine_rotation = Some(rng.range(-cfg.fine_rotation_deg, cfg.fine_rotation_deg));
        }
        if cfg.rgb_shift > 0.0 && rng.bernoulli(cfg.step_prob) {
            let t = cfg.rgb_shift.round() as i32;
            plan.rgb_shift = Some([0; 3].map(|_: i32| rng.int_range(-t, t)));
        }
        if (cfg.contrast > 0.0 || cfg.brightness > 0.0) && rng.bernoulli(cfg.step_prob) {
            let c = rng.range(-cfg.contrast, cfg.contrast);
            let b = rng.range(-cfg.brightness, cfg.brightness);
            plan.contrast_brightness = Some((c, b));
        }
        plan
    }

    pub fn apply(&self, img: &ImageTile, mask: &MaskTile) -> Result<(ImageTile, MaskTile)> {
        crate::data::check_pair(img, mask)?;
        let mut img = rotate90_image(img, self.quarter_turns);
        let mut mask = rotate90_mask(mask, self.quarter_turns);
        if let Some(axis) = self.flip {
            img = flip_image(&img, axis);
            mask = flip_mask(&mask, axis);
        }
        if let Some(deg) = self.fine_rotation {
            img = rotate_image(&img, deg, Interp::Bilinear);
            mask = rotate_mask(&mask, deg);
        }
        if let Some(s) = self.rgb_shift {
            shift_rgb(&mut img, s);
        }
        if let Some((c, b)) = self.contrast_brightness {
            contrast_brightness(&mut img, c, b);
        }
        Ok((img, mask))
    }
}

pub fn augment_pair(
    img: &ImageTile,
    mask: &MaskTile,
    cfg: &AugmentationConfig,
    rng: &mut Rng,
) -> Result<(ImageTile, MaskTile)> {
    AugmentPlan::sample(cfg, rng).apply(img, mask)
}

/// Generic raster remap: `src_of(y, x)` gives the source pixel of output
/// `(y, x)` on an `oh×ow` output grid.
fn remap<T: Copy>(
    src: &[T],
    w: usize,
    ch: usize,
    oh: usize,
    ow: usize,
    src_of: impl Fn(usize, usize) -> (usize, usize),
) -> Vec<T> {
    let mut out = Vec::with_capacity(oh * ow * ch);
    for y in 0..oh {
        for x in 0..ow {
            let (sy, sx) = src_of(y, x);
            let i = (sy * w + sx) * ch;
            out.extend_from_slice(&src[i..i + ch]);
        }
    }
    out
}

/// Source of output pixel `(y, x)` after `k` counter-clockwise quarter
/// turns of an `h×w` raster.
fn quarter_source(k: u8, h: usize, w: usize) -> impl Fn(usize, usize) -> (usize, usize) {
    move |y, x| match k % 4 {
        0 => (y, x),
        1 => (x, w - 1 - y),
        2 => (h - 1 - y, w - 1 - x),
        _ => (h - 1 - x, y),
    }
}

fn rotated_extents(k: u8, h: usize, w: usize) -> (usize, usize) {
    if k % 2 == 1 {
        (w, h)
    } else {
        (h, w)
    }
}

pub fn rotate90_image(img: &ImageTile, k: u8) -> ImageTile {
    let (oh, ow) = rotated_extents(k, img.height, img.width);
    ImageTile {
        height: oh,
        width: ow,
        pixels: remap(
            &img.pixels,
            img.width,
            3,
            oh,
            ow,
            quarter_source(k, img.height, img.width),
        ),
    }
}

pub fn rotate90_mask(mask: &MaskTile, k: u8) -> MaskTile {
    let (oh, ow) = rotated_extents(k, mask.height, mask.width);
    MaskTile {
        height: oh,
        width: ow,
        labels: remap(
            &mask.labels,
            mask.width,
            1,
            oh,
            ow,
            quarter_source(k, mask.height, mask.width),
        ),
    }
}

fn flip_source(axis: FlipAxis, h: usize, w: usize) -> impl Fn(usize, usize) -> (usize, usize) {
    move |y, x| match axis {
        FlipAxis::Horizontal => (y, w - 1 - x),
        FlipAxis::Vertical => (h - 1 - y, x),
    }
}

pub fn flip_image(img: &ImageTile, axis: FlipAxis) -> ImageTile {
    ImageTile {
        pixels: remap(
            &img.pixels,
            img.width,
            3,
            img.height,
            img.width,
            flip_source(axis, img.height, img.width),
        ),
        ..*img
    }
}

pub fn flip_mask(mask: &MaskTile, axis: FlipAxis) -> MaskTile {
    MaskTile {
        labels: remap(
            &mask.labels,
            mask.width,
            1,
            mask.height,
            mask.width,
            flip_source(axis, mask.height, mask.width),
        ),
        ..*mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Reflects a continuous pixel coordinate into `[0, n − 1]` (mirror about
/// the outermost pixel centers).
fn reflect(u: f32, n: usize) -> f32 {
    if n == 1 {
        return 0.0;
    }
    let period = 2.0 * (n - 1) as f32;
    let r = u.rem_euclid(period);
    if r > (n - 1) as f32 {
        period - r
    } else {
        r
    }
}

/// Source coordinate `(sy, sx)` of output pixel `(y, x)` for a rotation by
/// `deg` counter-clockwise about the raster center, reflected into range.
fn rotation_source(deg: f32, h: usize, w: usize) -> impl Fn(usize, usize) -> (f32, f32) {
    let (s, c) = deg.to_radians().sin_cos();
    let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
    move |y, x| {
        let (dy, dx) = (y as f32 - cy, x as f32 - cx);
        // inverse of a counter-clockwise rotation in image (y-down) axes
        let sx = c * dx - s * dy + cx;
        let sy = s * dx + c * dy + cy;
        (reflect(sy, h), reflect(sx, w))
    }
}

fn nearest(u: f32, n: usize) -> usize {
    (u.round() as usize).min(n - 1)
}

pub fn rotate_image(img: &ImageTile, deg: f32, interp: Interp) -> ImageTile {
    let (h, w) = (img.height, img.width);
    let src_of = rotation_source(deg, h, w);
    let mut pixels = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = src_of(y, x);
            match interp {
                Interp::Nearest => pixels.extend_from_slice(&img.rgb(nearest(sy, h), nearest(sx, w))),
                Interp::Bilinear => {
                    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                    let (ty, tx) = (sy - y0 as f32, sx - x0 as f32);
                    let (a, b, c, d) = (img.rgb(y0, x0), img.rgb(y0, x1), img.rgb(y1, x0), img.rgb(y1, x1));
                    for ch in 0..3 {
                        let top = a[ch] as f32 * (1.0 - tx) + b[ch] as f32 * tx;
                        let bot = c[ch] as f32 * (1.0 - tx) + d[ch] as f32 * tx;
                        let v = top * (1.0 - ty) + bot * ty;
                        pixels.push(v.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
        }
    }
    ImageTile {
        height: h,
        width: w,
        pixels,
    }
}

/// Nearest-neighbour rotation, so labels stay categorical.
pub fn rotate_mask(mask: &MaskTile, deg: f32) -> MaskTile {
    let (h, w) = (mask.height, mask.width);
    let src_of = rotation_source(deg, h, w);
    let mut labels = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = src_of(y, x);
            labels.push(mask.at(nearest(sy, h), nearest(sx, w)));
        }
    }
    MaskTile {
        height: h,
        width: w,
        labels,
    }
}

pub fn shift_rgb(img: &mut ImageTile, shift: [i32; 3]) {
    for (i, p) in img.pixels.iter_mut().enumerate() {
        *p = (*p as i32 + shift[i % 3]).clamp(0, 255) as u8;
    }
}

/// `v' = (v − 128)(1 + c) + 128 + 255·b`, rounded half to even, clamped.
pub fn contrast_brightness(img: &mut ImageTile, c: f32, b: f32) {
    for p in img.pixels.iter_mut() {
        let v = (*p as f32 - 128.0) * (1.0 + c) + 128.0 + 255.0 * b;
        *p = v.round_ties_even().clamp(0.0, 255.0) as u8;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coded(n: usize) -> (ImageTile, MaskTile) {
        let labels: Vec<u8> = (0..n * n).map(|i| i as u8).collect();
        let pixels = labels.iter().flat_map(|&l| [l, l, l]).collect();
        (
            ImageTile::new(n, n, pixels).unwrap(),
            MaskTile::new(n, n, labels).unwrap(),
        )
    }

    #[test]
    fn identity_plan_is_identity() {
        let (img, mask) = coded(4);
        let (i2, m2) = AugmentPlan::identity().apply(&img, &mask).unwrap();
        assert_eq!((i2, m2), (img, mask));
        let mut rng = Rng::new(1);
        let plan = AugmentPlan::sample(&AugmentationConfig::off(), &mut rng);
        assert_eq!(plan, AugmentPlan::identity());
    }

    #[test]
    fn quarter_turns_compose() {
        let (_, mask) = coded(4);
        let twice = rotate90_mask(&rotate90_mask(&mask, 1), 1);
        assert_eq!(twice, rotate90_mask(&mask, 2));
        assert_eq!(rotate90_mask(&twice, 2), mask);
        // counter-clockwise: top-right corner moves to top-left
        assert_eq!(rotate90_mask(&mask, 1).at(0, 0), mask.at(0, 3));
    }

    #[test]
    fn brightness_on_mid_gray() {
        let mut img = ImageTile::filled(1, 1, [128; 3]);
        contrast_brightness(&mut img, 0.0, 0.3);
        assert_eq!(img.pixels, vec![204; 3]);
    }

    #[test]
    fn small_rotation_keeps_center() {
        let (_, mask) = coded(5);
        assert_eq!(rotate_mask(&mask, 10.0).at(2, 2), mask.at(2, 2));
        assert_eq!(rotate_mask(&mask, 0.0), mask);
    }

    #[test]
    fn reflection_stays_in_range() {
        for u in [-3.5f32, -0.2, 0.0, 4.0, 4.7, 9.1] {
            let r = reflect(u, 5);
            assert!((0.0..=4.0).contains(&r), "{u} -> {r}");
        }
        assert_eq!(reflect(-1.0, 5), 1.0);
        assert_eq!(reflect(5.0, 5), 3.0);
    }
}
