//! Shared test oracles: central finite differences and scalar-loop metric
//! reference implementations.
#![allow(dead_code)]

pub mod suites;

use benthiq::data::MaskTile;
use benthiq::{no_grad, ParamStore, Rng, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct GradOpts {
    pub step: f32,
    pub rtol: f64,
    /// Floor for near-zero gradients, where f32 rounding of the
    /// perturbed outputs dominates the difference quotient.
    pub atol: f64,
    /// Elements checked per parameter (all when the tensor is smaller).
    pub max_per_param: usize,
    pub seed: u64,
}

impl GradOpts {
    pub fn op_level() -> Self {
        GradOpts {
            step: 1e-3,
            rtol: 1e-3,
            atol: 1e-4,
            max_per_param: 64,
            seed: 7,
        }
    }

    /// Op tolerance for composed layers with hundreds of f32 outputs, whose
    /// rounding noise in the difference quotient is about
    /// `ε·√N·|y| / 2h ≈ 3e-4`.
    pub fn layer_level() -> Self {
        GradOpts {
            atol: 1e-3,
            ..Self::op_level()
        }
    }

    pub fn network_level() -> Self {
        GradOpts {
            rtol: 1e-2,
            atol: 1e-3,
            max_per_param: 6,
            ..Self::op_level()
        }
    }
}

#[derive(Debug)]
pub struct GradReport {
    pub checked: usize,
    pub failures: Vec<String>,
    /// Largest `|analytic − numeric| / (atol + rtol·max(|a|, |n|))`.
    pub worst: f64,
}

impl GradReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loss `Σ_k R_k·out_k` in f64 with fixed random weights `R`, so every
/// output element contributes a distinct sensitivity.
fn weighted(out: &Tensor, r: &[f64]) -> f64 {
    out.data().iter().zip(r).map(|(&o, &w)| o as f64 * w).sum()
}

/// Compares reverse-mode gradients of `f` w.r.t. every parameter of `store`
/// against central differences.
pub fn gradcheck(store: &mut ParamStore, f: &dyn Fn(&ParamStore) -> Tensor, opts: GradOpts) -> GradReport {
    let mut rng = Rng::new(opts.seed);
    let out = f(store);
    let r: Vec<f64> = (0..out.numel()).map(|_| rng.range(-1.0, 1.0) as f64).collect();
    let rt = Tensor::new(out.shape(), r.iter().map(|&v| v as f32).collect()).unwrap();
    out.mul(&rt).unwrap().sum().backward().unwrap();
    let analytic: Vec<(String, Vec<f32>)> = store
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                p.tensor.grad().unwrap_or_else(|| vec![0.0; p.tensor.numel()]),
            )
        })
        .collect();
    let mut report = GradReport {
        checked: 0,
        failures: Vec::new(),
        worst: 0.0,
    };
    for (name, grad) in analytic {
        let base = store.get(&name).unwrap().tensor.to_vec();
        let n = base.len();
        let picks: Vec<usize> = if n <= opts.max_per_param {
            (0..n).collect()
        } else {
            (0..opts.max_per_param).map(|_| rng.below(n)).collect()
        };
        for j in picks {
            let eval_at = |store: &mut ParamStore, v: f32| {
                let mut vals = base.clone();
                vals[j] = v;
                store.set_values(&name, vals, None).unwrap();
                no_grad(|| weighted(&f(store), &r))
            };
            let hi = base[j] + opts.step;
            let lo = base[j] - opts.step;
            let numeric = (eval_at(store, hi) - eval_at(store, lo)) / (hi as f64 - lo as f64);
            store.set_values(&name, base.clone(), None).unwrap();
            let a = grad[j] as f64;
            let tol = opts.atol + opts.rtol * a.abs().max(numeric.abs());
            let ratio = (a - numeric).abs() / tol;
            report.worst = report.worst.max(ratio);
            report.checked += 1;
            if ratio > 1.0 {
                report
                    .failures
                    .push(format!("{name}[{j}]: analytic {a:.6e} vs numeric {numeric:.6e}"));
            }
        }
    }
    report
}

pub fn random_values(rng: &mut Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.range(-scale, scale)).collect()
}

pub fn random_mask(rng: &mut Rng, h: usize, w: usize, n: usize) -> MaskTile {
    MaskTile::new(h, w, (0..h * w).map(|_| rng.below(n) as u8).collect()).unwrap()
}

/// Random mask built from a few constant rectangles, so borders are sparse.
pub fn blocky_mask(rng: &mut Rng, h: usize, w: usize, n: usize) -> MaskTile {
    let mut m = MaskTile::filled(h, w, rng.below(n) as u8);
    for _ in 0..3 {
        let (y0, x0) = (rng.below(h), rng.below(w));
        let (y1, x1) = (y0 + 1 + rng.below(h - y0), x0 + 1 + rng.below(w - x0));
        let l = rng.below(n) as u8;
        for y in y0..y1 {
            for x in x0..x1 {
                m.labels[y * w + x] = l;
            }
        }
    }
    m
}

/// Pixel-scan confusion counts: `[gt][pred]`.
pub fn oracle_confusion(pred: &MaskTile, gt: &MaskTile, n: usize) -> Vec<Vec<u64>> {
    let mut cm = vec![vec![0u64; n]; n];
    for y in 0..gt.height {
        for x in 0..gt.width {
            cm[gt.at(y, x) as usize][pred.at(y, x) as usize] += 1;
        }
    }
    cm
}

/// Per-class IOU (0–100, `None` if absent from both) and their mean, by
/// direct set counting.
pub fn oracle_iou(pred: &MaskTile, gt: &MaskTile, n: usize) -> (Vec<Option<f64>>, f64) {
    let mut per = Vec::new();
    for c in 0..n as u8 {
        let mut inter = 0;
        let mut union = 0;
        for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
            if p == c && g == c {
                inter += 1;
            }
            if p == c || g == c {
                union += 1;
            }
        }
        per.push((union > 0).then(|| 100.0 * inter as f64 / union as f64));
    }
    let present: Vec<f64> = per.iter().flatten().copied().collect();
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    (per, mean)
}

/// Border by explicit neighbour enumeration.
pub fn oracle_border(gt: &MaskTile) -> Vec<bool> {
    let (h, w) = (gt.height as isize, gt.width as isize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = gt.at(y as usize, x as usize);
            let mut border = false;
            for (dy, dx) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (yy, xx) = (y + dy, x + dx);
                if yy >= 0 && yy < h && xx >= 0 && xx < w && gt.at(yy as usize, xx as usize) != l {
                    border = true;
                }
            }
            out.push(border);
        }
    }
    out
}

/// Accuracy (0–100) over `region`, `None` when empty.
pub fn oracle_region_accuracy(pred: &MaskTile, gt: &MaskTile, region: &[bool]) -> Option<f64> {
    let mut total = 0;
    let mut correct = 0;
    for (i, _) in region.iter().enumerate().filter(|(_, &r)| r) {
        total += 1;
        if pred.labels[i] == gt.labels[i] {
            correct += 1;
        }
    }
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

/// Dice loss evaluated directly in f64 from `[pixels, classes]` logits.
pub fn oracle_dice(logits: &[f32], labels: &[u8], n: usize) -> f64 {
    let mut inter = vec![0.0f64; n];
    let mut psum = vec![0.0f64; n];
    let mut gsum = vec![0.0f64; n];
    for (px, &l) in logits.chunks(n).zip(labels) {
        let m = px.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v as f64));
        let z: f64 = px.iter().map(|&v| (v as f64 - m).exp()).sum();
        for c in 0..n {
            let p = (px[c] as f64 - m).exp() / z;
            psum[c] += p;
            if c == l as usize {
                inter[c] += p;
                gsum[c] += 1.0;
            }
        }
    }
    let eps = 1e-5;
    let dice: f64 = (0..n)
        .map(|c| (2.0 * inter[c] + eps) / (psum[c] + gsum[c] + eps))
        .sum::<f64>()
        / n as f64;
    1.0 - dice
}

/// Region id of token `(i, j)` of the rolled grid: which side of the
/// wrap seam its pre-shift source lies on, per axis.
pub fn oracle_region(i: usize, j: usize, h: usize, w: usize, offset: usize) -> (bool, bool) {
    (i + offset >= h, j + offset >= w)
}
