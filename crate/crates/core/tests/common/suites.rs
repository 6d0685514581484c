//! Criterion-level checks shared by the focused test targets and the
//! acceptance runner. Each returns a one-line summary or the failures.

use std::rc::Rc;

use benthiq::data::{decode_image, decode_mask, encode_image, encode_mask, ImageTile, MaskTile};
use benthiq::metrics::{border_mask, confusion_matrix, dice_loss_flat, iou_scores, region_accuracy, MetricsReport};
use benthiq::model::{load_checkpoint, save_checkpoint, BenthiqNet, ModelConfig};
use benthiq::swin::{
    bicubic_weights, build_shift_mask, cyclic_shift, window_partition, window_reverse, BicubicUpsample, FeatureMap,
    PatchEmbed, PatchMerge, PatchSplit, SwinBlock, WindowAttention, WindowSet, NEG_LARGE,
};
use benthiq::tensor::ParamId;
use benthiq::{no_grad, ParamStore, Rng, Tensor};

use super::*;

pub type SuiteResult = Result<String, String>;

fn collect(failures: Vec<String>, summary: String) -> SuiteResult {
    if failures.is_empty() {
        Ok(summary)
    } else {
        let shown: Vec<&str> = failures.iter().take(8).map(String::as_str).collect();
        Err(format!("{} failures: {}", failures.len(), shown.join("; ")))
    }
}

pub struct GradCase {
    pub name: &'static str,
    pub store: ParamStore,
    pub f: Box<dyn Fn(&ParamStore) -> Tensor>,
    pub opts: GradOpts,
}

fn op_case(
    name: &'static str,
    inputs: Vec<(Vec<usize>, Vec<f32>)>,
    f: impl Fn(&[&Tensor]) -> benthiq::Result<Tensor> + 'static,
) -> GradCase {
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, (s, d))| store.add(format!("x{i}"), &s, d).unwrap())
        .collect();
    GradCase {
        name,
        store,
        f: Box::new(move |s| {
            let ts: Vec<&Tensor> = ids.iter().map(|&id| s.tensor(id)).collect();
            f(&ts).unwrap()
        }),
        opts: GradOpts::op_level(),
    }
}

/// Replaces every parameter by uniform noise; layer-norm gains are
/// centered on 1.
pub fn randomize(store: &mut ParamStore, rng: &mut Rng, scale: f32) {
    let names: Vec<(String, usize)> = store.iter().map(|p| (p.name.clone(), p.tensor.numel())).collect();
    for (name, n) in names {
        let offset = if name.contains("norm") && name.ends_with(".weight") {
            1.0
        } else {
            0.0
        };
        let vals = (0..n).map(|_| offset + rng.range(-scale, scale)).collect();
        store.set_values(&name, vals, None).unwrap();
    }
}

fn feature_input(store: &mut ParamStore, rng: &mut Rng, shape: [usize; 4]) -> ParamId {
    let [b, h, w, c] = shape;
    store
        .add("input", &[b * h * w, c], random_values(rng, b * h * w * c, 1.0))
        .unwrap()
}

fn fm(store: &ParamStore, id: ParamId, shape: [usize; 4]) -> FeatureMap {
    let [b, h, w, c] = shape;
    FeatureMap::new(b, h, w, c, store.tensor(id).clone()).unwrap()
}

pub fn gradient_cases() -> Vec<GradCase> {
    let mut rng = Rng::new(2024);
    let r = &mut rng;
    let v = |r: &mut Rng, shape: &[usize]| (shape.to_vec(), random_values(r, shape.iter().product(), 1.0));
    let pos = |r: &mut Rng, shape: &[usize]| {
        let n = shape.iter().product();
        (shape.to_vec(), (0..n).map(|_| r.range(0.5, 1.5)).collect::<Vec<f32>>())
    };
    let mut cases = vec![
        op_case("add", vec![v(r, &[3, 4]), v(r, &[3, 4])], |x| x[0].add(x[1])),
        op_case("add_broadcast", vec![v(r, &[2, 3, 4]), v(r, &[4])], |x| x[0].add(x[1])),
        op_case("sub_broadcast", vec![v(r, &[3, 4]), v(r, &[4])], |x| x[0].sub(x[1])),
        op_case("mul_broadcast", vec![v(r, &[2, 3, 4]), v(r, &[3, 4])], |x| {
            x[0].mul(x[1])
        }),
        op_case("div_broadcast", vec![v(r, &[3, 4]), pos(r, &[4])], |x| x[0].div(x[1])),
        op_case("scale", vec![v(r, &[5])], |x| Ok(x[0].scale(-1.7))),
        op_case("add_scalar", vec![v(r, &[5])], |x| Ok(x[0].add_scalar(0.3))),
        op_case("neg", vec![v(r, &[5])], |x| Ok(x[0].neg())),
        op_case("sum", vec![v(r, &[3, 4])], |x| Ok(x[0].sum())),
        op_case("mean", vec![v(r, &[3, 4])], |x| Ok(x[0].mean())),
        op_case("sum_axis_first", vec![v(r, &[3, 4, 5])], |x| x[0].sum_axis(0)),
        op_case("sum_axis_last", vec![v(r, &[3, 4, 5])], |x| x[0].sum_axis(-1)),
        op_case("matmul_batched", vec![v(r, &[2, 3, 4]), v(r, &[2, 4, 5])], |x| {
            x[0].matmul(x[1])
        }),
        op_case("matmul_shared_rhs", vec![v(r, &[2, 3, 4]), v(r, &[4, 5])], |x| {
            x[0].matmul(x[1])
        }),
        op_case("linear", vec![v(r, &[6, 4]), v(r, &[4, 3]), v(r, &[3])], |x| {
            x[0].linear(x[1], Some(x[2]))
        }),
        op_case("softmax_last", vec![v(r, &[3, 5])], |x| x[0].softmax(-1)),
        op_case("softmax_middle", vec![v(r, &[2, 3, 4])], |x| x[0].softmax(1)),
        op_case("layer_norm", vec![v(r, &[5, 6]), v(r, &[6]), v(r, &[6])], |x| {
            x[0].layer_norm(x[1], x[2], 1e-5)
        }),
        op_case(
            "gelu",
            vec![(vec![20], (0..20).map(|i| -3.0 + 0.31 * i as f32).collect())],
            |x| Ok(x[0].gelu()),
        ),
        op_case("reshape", vec![v(r, &[2, 6])], |x| {
            x[0].reshape(&[3, 4])?.mul(&x[0].reshape(&[3, 4])?)
        }),
        op_case("permute", vec![v(r, &[2, 3, 4])], |x| x[0].permute(&[2, 0, 1])),
        op_case("gather_repeated", vec![v(r, &[6])], |x| {
            x[0].gather(&[2, 4], Rc::new(vec![0, 5, 5, 2, 1, 1, 1, 3]))
        }),
        op_case("narrow", vec![v(r, &[3, 5])], |x| x[0].narrow(1, 1, 3)),
        op_case("concat", vec![v(r, &[2, 3]), v(r, &[2, 2])], |x| {
            Tensor::concat(&[x[0], x[1]], 1)
        }),
        op_case("resample_axis", vec![v(r, &[2, 3, 2])], |x| {
            x[0].resample_axis(1, Rc::new(bicubic_weights(3, 6)), 6)
        }),
    ];

    let logits = v(r, &[12, 4]);
    let labels: Vec<u8> = (0..12).map(|_| r.below(4) as u8).collect();
    cases.push(op_case("dice_loss", vec![logits], move |x| {
        dice_loss_flat(x[0], &labels)
    }));

    let shape = [2, 4, 4, 3];
    let mut store = ParamStore::new();
    let id = feature_input(&mut store, r, shape);
    cases.push(GradCase {
        name: "cyclic_shift",
        store,
        f: Box::new(move |s| cyclic_shift(&fm(s, id, shape), 1).unwrap().data),
        opts: GradOpts::op_level(),
    });

    let shape = [2, 4, 4, 3];
    let mut store = ParamStore::new();
    let id = feature_input(&mut store, r, shape);
    cases.push(GradCase {
        name: "window_partition",
        store,
        f: Box::new(move |s| window_partition(&fm(s, id, shape), 2).unwrap().tokens),
        opts: GradOpts::op_level(),
    });

    let mut store = ParamStore::new();
    let id = store.add("input", &[8, 4, 3], random_values(r, 96, 1.0)).unwrap();
    cases.push(GradCase {
        name: "window_reverse",
        store,
        f: Box::new(move |s| {
            let ws = WindowSet {
                batch: 2,
                num_windows: 4,
                window_size: 2,
                tokens: s.tensor(id).clone(),
                origin: (4, 4),
            };
            window_reverse(&ws).unwrap().data
        }),
        opts: GradOpts::op_level(),
    });

    // Shifted-window attention with a random relative position table.
    let (dim, heads, m, res) = (8, 2, 4, 8);
    let shape = [1, res, res, dim];
    let mut store = ParamStore::new();
    let attn = WindowAttention::new(&mut store, r, "attn", dim, heads, m, true).unwrap();
    randomize(&mut store, r, 0.5);
    let id = feature_input(&mut store, r, shape);
    let mask = build_shift_mask(res, res, m, 2).unwrap();
    cases.push(GradCase {
        name: "window_attention_masked",
        store,
        f: Box::new(move |s| {
            let ws = window_partition(&fm(s, id, shape), m).unwrap();
            attn.forward(s, &ws, Some(&mask)).unwrap().tokens
        }),
        opts: GradOpts::layer_level(),
    });

    let mut store = ParamStore::new();
    let embed = PatchEmbed::new(&mut store, r, "embed", 2, 12).unwrap();
    randomize(&mut store, r, 0.5);
    let id = store.add("input", &[1, 4, 4, 3], random_values(r, 48, 1.0)).unwrap();
    cases.push(GradCase {
        name: "patch_embed",
        store,
        f: Box::new(move |s| embed.forward(s, s.tensor(id)).unwrap().data),
        opts: GradOpts::layer_level(),
    });

    let shape = [1, 4, 4, 4];
    let mut store = ParamStore::new();
    let merge = PatchMerge::new(&mut store, r, "merge", 4).unwrap();
    randomize(&mut store, r, 0.5);
    let id = feature_input(&mut store, r, shape);
    cases.push(GradCase {
        name: "patch_merge",
        store,
        f: Box::new(move |s| merge.forward(s, &fm(s, id, shape)).unwrap().data),
        opts: GradOpts::layer_level(),
    });

    let shape = [1, 2, 2, 16];
    let mut store = ParamStore::new();
    let split = PatchSplit::new(&mut store, r, "split", 16).unwrap();
    randomize(&mut store, r, 0.5);
    let id = feature_input(&mut store, r, shape);
    cases.push(GradCase {
        name: "patch_split",
        store,
        f: Box::new(move |s| split.forward(s, &fm(s, id, shape)).unwrap().data),
        opts: GradOpts::layer_level(),
    });

    let shape = [1, 3, 3, 16];
    let mut store = ParamStore::new();
    let up = BicubicUpsample::new(&mut store, r, "up", 16).unwrap();
    randomize(&mut store, r, 0.5);
    let id = feature_input(&mut store, r, shape);
    cases.push(GradCase {
        name: "bicubic_upsample",
        store,
        f: Box::new(move |s| up.forward(s, &fm(s, id, shape)).unwrap().data),
        opts: GradOpts::layer_level(),
    });

    cases.push(two_block_case(r));
    cases
}

/// W-MSA block followed by an SW-MSA block, checked at network tolerance.
fn two_block_case(r: &mut Rng) -> GradCase {
    let (dim, heads, m, res) = (8, 2, 4, 8);
    let shape = [1, res, res, dim];
    let mut store = ParamStore::new();
    let blocks: Vec<SwinBlock> = (0..2)
        .map(|j| {
            let shift = SwinBlock::default_shift(j == 1, m, (res, res));
            SwinBlock::new(
                &mut store,
                r,
                &format!("block{j}"),
                dim,
                heads,
                m,
                (res, res),
                shift,
                2,
                true,
            )
            .unwrap()
        })
        .collect();
    randomize(&mut store, r, 0.3);
    let id = feature_input(&mut store, r, shape);
    GradCase {
        name: "two_block_network",
        store,
        f: Box::new(move |s| {
            let mut x = fm(s, id, shape);
            for b in &blocks {
                x = b.forward(s, &x).unwrap();
            }
            x.data
        }),
        opts: GradOpts::network_level(),
    }
}

pub fn gradient_suite() -> SuiteResult {
    let mut failures = Vec::new();
    let mut checked = 0;
    let cases = gradient_cases();
    let n = cases.len();
    for mut case in cases {
        let rep = gradcheck(&mut case.store, case.f.as_ref(), case.opts);
        checked += rep.checked;
        for f in rep.failures {
            failures.push(format!("{}: {f}", case.name));
        }
    }
    collect(failures, format!("{n} cases, {checked} partials"))
}

/// Slot-to-token map of every window, enumerated independently of the
/// library.
fn window_slots(h: usize, w: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for wy in 0..h / m {
        for wx in 0..w / m {
            let mut slots = Vec::new();
            for ty in 0..m {
                for tx in 0..m {
                    slots.push((wy * m + ty, wx * m + tx));
                }
            }
            out.push(slots);
        }
    }
    out
}

pub const SHIFT_CASES: [(usize, usize); 4] = [(7, 14), (7, 28), (4, 8), (4, 16)];

/// Mask entries against the wrap-region oracle, then post-softmax weight
/// of every masked pair.
pub fn shift_mask_suite() -> SuiteResult {
    let mut failures = Vec::new();
    let mut worst = 0.0f32;
    let mut rng = Rng::new(77);
    for (m, res) in SHIFT_CASES {
        let o = m / 2;
        let mask = build_shift_mask(res, res, m, o).unwrap();
        let bias = mask.bias.data();
        let n = m * m;
        for (wi, slots) in window_slots(res, res, m).iter().enumerate() {
            for (a, &(ia, ja)) in slots.iter().enumerate() {
                for (b, &(ib, jb)) in slots.iter().enumerate() {
                    let want = oracle_region(ia, ja, res, res, o) != oracle_region(ib, jb, res, res, o);
                    let got = bias[(wi * n + a) * n + b];
                    if (got == NEG_LARGE) != want || (!want && got != 0.0) {
                        failures.push(format!("M{m} res{res} window {wi} pair ({a},{b}): {got}"));
                    }
                }
            }
        }
        let (dim, heads) = (6, 2);
        let mut store = ParamStore::new();
        let attn = WindowAttention::new(&mut store, &mut rng, "attn", dim, heads, m, true).unwrap();
        randomize(&mut store, &mut rng, 1.0);
        let x = Tensor::new(&[res * res, dim], random_values(&mut rng, res * res * dim, 2.0)).unwrap();
        let f = cyclic_shift(&FeatureMap::new(1, res, res, dim, x).unwrap(), o as isize).unwrap();
        let ws = window_partition(&f, m).unwrap();
        let (_, weights) = no_grad(|| attn.forward_with_weights(&store, &ws, Some(&mask))).unwrap();
        let wd = weights.data();
        for wi in 0..mask.num_windows {
            for h in 0..heads {
                for a in 0..n {
                    for b in 0..n {
                        if bias[(wi * n + a) * n + b] == NEG_LARGE {
                            let p = wd[((wi * heads + h) * n + a) * n + b];
                            worst = worst.max(p);
                            if p >= 1e-4 {
                                failures.push(format!("M{m} res{res} masked weight {p}"));
                            }
                        }
                    }
                }
            }
        }
    }
    collect(
        failures,
        format!("{} grids, max masked weight {worst:.1e}", SHIFT_CASES.len()),
    )
}

/// Expected dimension chain: encoder halves resolution and doubles channels
/// per stage, decoder mirrors it, two final ×2 upsamplings reach full size.
pub fn expected_chain(cfg: &ModelConfig) -> Vec<(String, usize, usize)> {
    let g = cfg.input_size / cfg.patch_size;
    let c = cfg.embed_dim;
    let mut out = vec![("embed".to_string(), g, c)];
    for i in 0..4 {
        out.push((format!("encoder.stage{i}"), g >> i, c << i));
        if i < 3 {
            out.push((format!("encoder.merge{i}"), g >> (i + 1), c << (i + 1)));
        }
    }
    out.push(("bottleneck".into(), g >> 3, c << 3));
    for i in (0..3).rev() {
        out.push((format!("decoder.up{i}"), g >> i, c << i));
        out.push((format!("decoder.stage{i}"), g >> i, c << i));
    }
    out.push(("decoder.final_up0".into(), 2 * g, c / 2));
    out.push(("decoder.final_up1".into(), 4 * g, c / 4));
    out.push(("head".into(), cfg.input_size, cfg.num_classes));
    out
}

pub fn structural_suite() -> SuiteResult {
    let mut failures = Vec::new();
    for cfg in [ModelConfig::swin_t(), ModelConfig::desk()] {
        let net = BenthiqNet::build(&cfg, &mut Rng::new(1)).unwrap();
        let n = cfg.input_size;
        let x = Tensor::zeros(&[1, n, n, 3]);
        let (logits, trace) = no_grad(|| net.forward_traced(&x)).unwrap();
        let got: Vec<(String, usize, usize)> = trace
            .iter()
            .map(|s| {
                if s.height != s.width {
                    failures.push(format!("{}: non-square {}x{}", s.name, s.height, s.width));
                }
                (s.name.clone(), s.height, s.channels)
            })
            .collect();
        if got != expected_chain(&cfg) {
            failures.push(format!("{} chain {got:?}", cfg.variant));
        }
        if logits.tensor.shape() != [1, n, n, 4] {
            failures.push(format!("{} logits {:?}", cfg.variant, logits.tensor.shape()));
        }
    }
    collect(failures, "swin_t@224 and desk@128 chains match".into())
}

pub fn roundtrip_suite(dir: &std::path::Path) -> SuiteResult {
    let mut failures = Vec::new();
    let mut rng = Rng::new(5);
    for (b, h, w, c, m) in [(2, 8, 8, 3, 4), (1, 14, 14, 5, 7), (3, 4, 8, 2, 2)] {
        let data = Tensor::new(&[b * h * w, c], random_values(&mut rng, b * h * w * c, 3.0)).unwrap();
        let f = FeatureMap::new(b, h, w, c, data.clone()).unwrap();
        let back = window_reverse(&window_partition(&f, m).unwrap()).unwrap();
        if back.data.data() != data.data() || back.extents() != f.extents() {
            failures.push(format!("partition/reverse {h}x{w} M{m}"));
        }
        for o in 1..h.min(w) as isize {
            let there = cyclic_shift(&f, o).unwrap();
            let back = cyclic_shift(&there, -o).unwrap();
            if back.data.data() != data.data() {
                failures.push(format!("cyclic shift ±{o} on {h}x{w}"));
            }
        }
    }

    let mut cfg = ModelConfig::desk();
    cfg.embed_dim = 12;
    cfg.heads = vec![1, 2, 4, 8];
    let mut net = BenthiqNet::build(&cfg, &mut Rng::new(3)).unwrap();
    randomize(&mut net.params, &mut rng, 0.1);
    let path = dir.join("roundtrip.ckpt");
    save_checkpoint(&net, 1234, 3, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    if loaded.config != net.config {
        failures.push("checkpoint config".into());
    }
    for p in net.params.iter() {
        let q = loaded.params.get(&p.name);
        let same = q.is_some_and(|q| {
            q.tensor.shape() == p.tensor.shape()
                && q.tensor
                    .data()
                    .iter()
                    .zip(p.tensor.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits())
        });
        if !same {
            failures.push(format!("checkpoint param {}", p.name));
        }
    }
    let x = Tensor::new(&[1, 128, 128, 3], random_values(&mut rng, 128 * 128 * 3, 1.0)).unwrap();
    let (a, b) = no_grad(|| (net.forward(&x).unwrap(), loaded.forward(&x).unwrap()));
    if a.tensor.data() != b.tensor.data() {
        failures.push("checkpoint forward differs".into());
    }

    for (h, w) in [(1, 1), (5, 7), (32, 32)] {
        let img = ImageTile::new(h, w, (0..h * w * 3).map(|_| rng.below(256) as u8).collect()).unwrap();
        if decode_image(&encode_image(&img)).ok().as_ref() != Some(&img) {
            failures.push(format!("image raster {h}x{w}"));
        }
        let mask = random_mask(&mut rng, h, w, 4);
        if decode_mask(&encode_mask(&mask), 4).ok().as_ref() != Some(&mask) {
            failures.push(format!("mask raster {h}x{w}"));
        }
        let ip = dir.join(format!("img_{h}x{w}.ppm"));
        let mp = dir.join(format!("mask_{h}x{w}.pgm"));
        benthiq::data::write_image(&ip, &img).unwrap();
        benthiq::data::write_mask(&mp, &mask).unwrap();
        if benthiq::data::read_image(&ip).unwrap() != img || benthiq::data::read_mask(&mp, 4).unwrap() != mask {
            failures.push(format!("raster file {h}x{w}"));
        }
    }
    collect(failures, "windows, shifts, checkpoint, rasters bit-exact".into())
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub fn metrics_trial(rng: &mut Rng, failures: &mut Vec<String>, t: usize) {
    let n = 4;
    let (h, w) = (1 + rng.below(8), 1 + rng.below(8));
    let (pred, gt) = if rng.bernoulli(0.5) {
        (random_mask(rng, h, w, n), random_mask(rng, h, w, n))
    } else {
        (blocky_mask(rng, h, w, n), blocky_mask(rng, h, w, n))
    };
    let cm = confusion_matrix(&pred, &gt, n).unwrap();
    let ocm = oracle_confusion(&pred, &gt, n);
    for (g, row) in ocm.iter().enumerate() {
        for (p, &v) in row.iter().enumerate() {
            if cm.get(g, p) != v {
                failures.push(format!("trial {t}: confusion[{g}][{p}]"));
            }
        }
    }
    let (per, miou) = iou_scores(&cm).unwrap();
    let (oper, omiou) = oracle_iou(&pred, &gt, n);
    if (miou - omiou).abs() > 1e-9 || per.iter().zip(&oper).any(|(a, b)| !close(*a, *b, 1e-9)) {
        failures.push(format!("trial {t}: iou {per:?} vs {oper:?}"));
    }
    let border = border_mask(&gt);
    let obord = oracle_border(&gt);
    if border.bits != obord {
        failures.push(format!("trial {t}: border"));
    }
    let interior: Vec<bool> = obord.iter().map(|b| !b).collect();
    let report = MetricsReport::for_tile(&pred, &gt, n).unwrap();
    let ob = oracle_region_accuracy(&pred, &gt, &obord);
    let oi = oracle_region_accuracy(&pred, &gt, &interior);
    if !close(report.border_accuracy, ob, 1e-9) || !close(report.interior_accuracy, oi, 1e-9) {
        failures.push(format!("trial {t}: region accuracy"));
    }
    if region_accuracy(&pred, &gt, &border).ok() != ob {
        failures.push(format!("trial {t}: region_accuracy on border"));
    }
    let logits = random_values(rng, h * w * n, 4.0);
    let d = no_grad(|| {
        dice_loss_flat(&Tensor::new(&[h * w, n], logits.clone()).unwrap(), &gt.labels)
            .unwrap()
            .item()
            .unwrap()
    });
    let od = oracle_dice(&logits, &gt.labels, n);
    if (d as f64 - od).abs() > 1e-5 {
        failures.push(format!("trial {t}: dice {d} vs {od}"));
    }
}

pub fn hand_case_miou() -> f64 {
    let gt = MaskTile::new(1, 4, vec![0, 0, 1, 1]).unwrap();
    let pred = MaskTile::new(1, 4, vec![0, 1, 1, 1]).unwrap();
    MetricsReport::for_tile(&pred, &gt, 4).unwrap().miou
}

pub fn metrics_suite() -> SuiteResult {
    let mut failures = Vec::new();
    let mut rng = Rng::new(100);
    for t in 0..100 {
        metrics_trial(&mut rng, &mut failures, t);
    }
    let hand = hand_case_miou();
    if (hand - 58.33).abs() > 0.01 {
        failures.push(format!("hand case mIOU {hand}"));
    }
    collect(failures, format!("100 random tiles agree, hand case mIOU {hand:.2}"))
}
