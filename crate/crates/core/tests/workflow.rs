//! End-to-end runs of the library workflows and the `benthiq` binary on a
//! tiny model (C = 8, M = 2, 64×64 tiles).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use benthiq::data::{DatasetManifest, Split, TileSet};
use benthiq::model::{load_checkpoint, Checkpoint};
use benthiq::run::{
    evaluate, parse_log, run_ablate, run_eval, run_synth, run_train, sha256_file, RunConfig, TrainOptions,
    DATASET_MANIFEST, OUTPUT_ROOT_ENV, RUN_MANIFEST,
};
use benthiq::Error;

const TINY: &str = "\
lr = 0.01
epochs = 2
batch_size = 2
synth.tiles = 12
split = 50,25,25
model.variant = custom
model.embed_dim = 8
model.heads = 1,2,4,8
model.window_size = 2
model.input_size = 64
";

fn tiny_text(root: &Path, extra: &[&str]) -> String {
    let mut t = format!(
        "{TINY}data_dir = {}\nout_dir = {}\n",
        root.join("data").display(),
        root.join("run").display()
    );
    for e in extra {
        t.push_str(e);
        t.push('\n');
    }
    t
}

fn tiny(root: &Path, extra: &[&str]) -> RunConfig {
    RunConfig::from_text(&tiny_text(root, extra)).unwrap()
}

fn split(cfg: &RunConfig, s: Split) -> TileSet {
    let dir = cfg.data_path();
    let m = DatasetManifest::load(dir.join(DATASET_MANIFEST)).unwrap();
    TileSet::load(&m, &dir, s, 4).unwrap()
}

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_benthiq"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove(OUTPUT_ROOT_ENV)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn cli_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg_path = root.join("tiny.cfg");
    std::fs::write(&cfg_path, tiny_text(root, &[])).unwrap();
    let c = cfg_path.to_str().unwrap();

    let o = bin(&["synth", "-c", c], root);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin(&["synth", "-c", c], root);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--force"));
    assert!(bin(&["synth", "-c", c, "--force"], root).status.success());

    let o = bin(&["train", "-c", c, "--epochs", "1"], root);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = root.join("run");
    for f in ["final.ckpt", "train_log.tsv", RUN_MANIFEST] {
        assert!(run.join(f).exists(), "{f}");
    }
    let ckpt = run.join("final.ckpt");
    let k = ckpt.to_str().unwrap();

    let o = bin(&["eval", "-c", c, "--checkpoint", k, "--out-dir", "evalrun"], root);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pooled.miou"));
    assert!(root.join("evalrun/eval_report.txt").exists());

    let m = DatasetManifest::load(root.join("data").join(DATASET_MANIFEST)).unwrap();
    let e = &m.entries[0];
    let img = root.join("data").join(&e.image);
    let gt = root.join("data").join(&e.mask);
    let args = [
        "predict",
        "-c",
        c,
        "--checkpoint",
        k,
        "--out-dir",
        "pred",
        "--image",
        img.to_str().unwrap(),
    ];
    let o = bin(&args, root);
    assert!(o.status.success(), "{}", stderr(&o));
    let stem = img.file_stem().unwrap().to_str().unwrap();
    assert!(root.join(format!("pred/{stem}_mask.pgm")).exists());
    assert!(root.join(format!("pred/{stem}_color.ppm")).exists());
    assert!(!root.join(format!("pred/{stem}_error.pgm")).exists());
    let mut with_gt = args.to_vec();
    with_gt.extend(["--gt", gt.to_str().unwrap()]);
    let o = bin(&with_gt, root);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("miou="));
    assert!(root.join(format!("pred/{stem}_error.pgm")).exists());

    let big = root.join("big.ppm");
    benthiq::data::write_image(&big, &benthiq::data::ImageTile::filled(32, 32, [1, 2, 3])).unwrap();
    let o = bin(
        &["predict", "-c", c, "--checkpoint", k, "--image", big.to_str().unwrap()],
        root,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no resizing"));

    let o = bin(&["eval", "-c", c, "--checkpoint", "missing.ckpt"], root);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.ckpt"));
}

#[test]
fn cli_rejects_bad_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let o = bin(&["train", "--set", "epochs=1"], root);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lr"));
    let o = bin(&["train", "--lr", "0.01", "--set", "learning_rate=3"], root);
    assert!(stderr(&o).contains("unknown config key"));
    let o = bin(&["train", "--lr", "0.01", "--set", "model.input_size=96"], root);
    assert!(stderr(&o).contains("stage 2"));
    assert!(!bin(&["frobnicate"], root).status.success());
}

#[test]
fn output_root_env_relocates_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_benthiq"))
        .args([
            "synth",
            "--lr",
            "0.01",
            "--set",
            "synth.tiles=3",
            "--set",
            "model.variant=custom",
        ])
        .args([
            "--set",
            "model.input_size=64",
            "--set",
            "model.window_size=2",
            "--data-dir",
            "rel",
        ])
        .current_dir(tmp.path())
        .env(OUTPUT_ROOT_ENV, tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("root/rel").join(DATASET_MANIFEST).exists());
    assert!(!tmp.path().join("rel").exists());
}

#[test]
fn zero_learning_rate_keeps_validation_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), &["epochs = 3"]);
    run_synth(&cfg, false).unwrap();
    let mut frozen = cfg.clone();
    frozen.lr = 0.0;
    let o = run_train(&frozen, &TrainOptions::default()).unwrap();
    let log = parse_log(&std::fs::read_to_string(&o.log_path).unwrap()).unwrap();
    let vals: Vec<&str> = log
        .iter()
        .filter(|e| e.key == "val_miou")
        .map(|e| e.value.as_str())
        .collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|v| *v == vals[0]), "{vals:?}");
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tiny(tmp.path(), &["epochs = 3"]);
    run_synth(&base, false).unwrap();
    let mut full = base.clone();
    full.out_dir = tmp.path().join("full");
    let a = run_train(&full, &TrainOptions::default()).unwrap();

    let mut part = base.clone();
    part.out_dir = tmp.path().join("part");
    part.epochs = 1;
    let first = run_train(&part, &TrainOptions::default()).unwrap();
    part.epochs = 3;
    let b = run_train(
        &part,
        &TrainOptions {
            resume: Some(first.final_checkpoint.clone()),
        },
    )
    .unwrap();
    assert_eq!(
        std::fs::read(&a.final_checkpoint).unwrap(),
        std::fs::read(&b.final_checkpoint).unwrap()
    );
    assert_eq!(a.final_train_loss, b.final_train_loss);
    let losses = |p: &Path| -> Vec<String> {
        parse_log(&std::fs::read_to_string(p).unwrap())
            .unwrap()
            .into_iter()
            .filter(|e| e.key == "train_dice_loss")
            .map(|e| format!("{}:{}", e.epoch, e.value))
            .collect()
    };
    assert_eq!(losses(&a.log_path), losses(&b.log_path));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tiny(tmp.path(), &[]);
    run_synth(&base, false).unwrap();
    let outs: Vec<PathBuf> = ["a", "b"]
        .iter()
        .map(|d| {
            let mut c = base.clone();
            c.out_dir = tmp.path().join(d);
            run_train(&c, &TrainOptions::default()).unwrap();
            c.out_dir
        })
        .collect();
    for f in ["train_log.tsv", "final.ckpt", "best.ckpt"] {
        assert_eq!(
            std::fs::read(outs[0].join(f)).unwrap(),
            std::fs::read(outs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn non_finite_weights_name_the_failing_op() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), &["epochs = 1"]);
    run_synth(&cfg, false).unwrap();
    let o = run_train(&cfg, &TrainOptions::default()).unwrap();
    let mut ckpt = Checkpoint::load(&o.final_checkpoint).unwrap();
    ckpt.params[0].values[0] = f32::NAN;
    let poisoned = tmp.path().join("nan.ckpt");
    ckpt.save(&poisoned).unwrap();
    let mut more = cfg.clone();
    more.epochs = 2;
    let err = run_train(&more, &TrainOptions { resume: Some(poisoned) }).unwrap_err();
    let Error::NonFinite { op } = err else {
        panic!("expected a non-finite error, got {err}");
    };
    assert!(!op.is_empty());
    let log = std::fs::read_to_string(&o.log_path).unwrap();
    assert!(log.contains(&format!("non_finite_loss\t{op}")), "{log}");
}

#[test]
fn eval_and_manifests_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), &["epochs = 1"]);
    run_synth(&cfg, false).unwrap();
    let o = run_train(&cfg, &TrainOptions::default()).unwrap();
    let mut ev = cfg.clone();
    ev.out_dir = tmp.path().join("eval");
    let summary = run_eval(&ev, &o.final_checkpoint).unwrap();
    let again = evaluate(
        &load_checkpoint(&o.final_checkpoint).unwrap(),
        &split(&cfg, Split::Test),
        3,
    )
    .unwrap();
    assert_eq!(summary.to_text(), again.to_text());

    for dir in [cfg.output_dir(), ev.out_dir.clone(), cfg.data_path()] {
        let text = std::fs::read_to_string(dir.join(RUN_MANIFEST)).unwrap();
        let reloaded = RunConfig::from_text(&text).unwrap();
        assert_eq!(reloaded.to_pairs(), RunConfig::from_text(&text).unwrap().to_pairs());
        assert_eq!(reloaded.model, cfg.model);
        let mut artifacts = 0;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("artifact.") {
                let (rel, sha) = rest.split_once(" = ").unwrap();
                assert_eq!(sha256_file(&dir.join(rel)).unwrap(), sha, "{rel}");
                artifacts += 1;
            }
        }
        assert!(artifacts > 0);
    }

    let log = parse_log(&std::fs::read_to_string(&o.log_path).unwrap()).unwrap();
    assert!(log
        .windows(2)
        .all(|w| (w[0].epoch, w[0].step) <= (w[1].epoch, w[1].step)));
    for key in [
        "seed",
        "parameters",
        "lr",
        "train_dice_loss",
        "val_miou",
        "final_checkpoint",
    ] {
        assert!(log.iter().any(|e| e.key == key), "{key}");
    }
    assert!(log.iter().all(|e| !e.value.contains(tmp.path().to_str().unwrap())));
}

#[test]
fn ablation_records_failures_and_matches_its_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(
        tmp.path(),
        &[
            "epochs = 1",
            "model.variant = swin_t_mini",
            "model.input_size = 128",
            "model.window_size = 4",
            "model.embed_dim = 24",
            "model.heads = 3,6,12,24",
            "synth.tiles = 8",
            "ablate.input_sizes = 96,128",
            "ablate.upsampling = bicubic",
            "ablate.variants = swin_t_mini",
        ],
    );
    cfg.batch_size = 4;
    run_synth(&cfg, false).unwrap();
    let rows = run_ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].result.is_err());
    let ok = rows[1].result.as_ref().unwrap();
    let ckpt = cfg.output_dir().join("cells").join(rows[1].label()).join("final.ckpt");
    let model = load_checkpoint(&ckpt).unwrap();
    assert_eq!(model.config.upsampling, benthiq::model::Upsampling::Bicubic);
    let again = evaluate(&model, &split(&cfg, Split::Test), 4).unwrap();
    assert_eq!(again.to_text(), ok.to_text());
    let table = std::fs::read_to_string(cfg.output_dir().join("ablation_table.txt")).unwrap();
    assert!(table.contains("failed"));
    assert!(table.contains(&format!("{:.2}", ok.pooled.miou)));
}
