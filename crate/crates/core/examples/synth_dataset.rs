//! Generates a small synthetic dataset on disk and reports its split sizes
//! and realized class composition.
//!
//! `cargo run --release --example synth_dataset -- /tmp/benthic`

use benthiq::data::{class_name, Split, SURVEY_FRACTIONS};
use benthiq::run::{synthesize, RunConfig};

fn main() -> benthiq::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synth_demo".into());
    let cfg = RunConfig::from_text("lr = 0.01\nsynth.tiles = 20\nmodel.input_size = 128")?;
    let manifest = synthesize(dir.as_ref(), &cfg)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        let n = manifest.entries.iter().filter(|e| e.split == split).count();
        println!("{split:?}: {n} tiles");
    }
    let set = benthiq::data::TileSet::load(&manifest, dir.as_ref(), Split::Train, 4)?;
    let mut counts = [0u64; 4];
    for m in &set.masks {
        m.class_counts(4).iter().enumerate().for_each(|(c, n)| counts[c] += n);
    }
    let total: u64 = counts.iter().sum();
    for c in 0..4 {
        println!(
            "{:<6} {:.3} (target {:.2})",
            class_name(c),
            counts[c] as f64 / total as f64,
            SURVEY_FRACTIONS[c]
        );
    }
    println!("written to {dir}");
    Ok(())
}
