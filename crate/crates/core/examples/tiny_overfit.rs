//! Trains the desk network on eight synthetic tiles until it memorizes them.
//!
//! `cargo run --release --example tiny_overfit -- 200`

use benthiq::data::{AugmentationConfig, TileGenerator, TileSet, SURVEY_FRACTIONS};
use benthiq::run::{evaluate, train_on, RunConfig, TrainOptions};
use benthiq::tensor::mix_seed;
use benthiq::Rng;

fn main() -> benthiq::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let mut cfg = RunConfig::from_text(&format!("lr = 0.01\nseed = 1234\nbatch_size = 4\nepochs = {epochs}"))?;
    cfg.augment = AugmentationConfig::off();
    let generator = TileGenerator::new(cfg.model.input_size, &SURVEY_FRACTIONS)?;
    let mut train = TileSet::default();
    for i in 0..8 {
        let (img, mask) = generator.generate(&mut Rng::new(mix_seed(cfg.seed, i)));
        train.push(img, mask)?;
    }
    let out = std::env::temp_dir().join("benthiq_tiny_overfit");
    let outcome = train_on(&cfg, &train, &TileSet::default(), &out, &TrainOptions::default())?;
    let summary = evaluate(&outcome.model, &train, 4)?;
    println!("final train Dice loss {:.4}", outcome.final_train_loss);
    println!("train mIOU {:.2}", summary.pooled.miou);
    println!("log: {}", outcome.log_path.display());
    Ok(())
}
