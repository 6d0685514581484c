//! Class-balanced batch selection on synthetic tiles, once with survey
//! composition (where the sampler usually falls back) and once with
//! balanced tiles.

use benthiq::data::{stratified_batches, AbundanceBand, TileGenerator, SURVEY_FRACTIONS};
use benthiq::Rng;

fn counts(fractions: &[f64], n: usize, rng: &mut Rng) -> benthiq::Result<Vec<Vec<u64>>> {
    let generator = TileGenerator::new(32, fractions)?;
    Ok((0..n).map(|_| generator.generate(rng).1.class_counts(4)).collect())
}

fn main() -> benthiq::Result<()> {
    let mut rng = Rng::new(11);
    let band = AbundanceBand::default();
    for (name, fractions) in [("survey", SURVEY_FRACTIONS), ("balanced", [0.25; 4])] {
        let c = counts(&fractions, 24, &mut rng)?;
        let plan = stratified_batches(&c, 4, band, &mut rng, 200)?;
        println!(
            "{name}: {} batches, fallback {}, rejected {}",
            plan.batches.len(),
            plan.fallback,
            plan.rejected
        );
        if let Some(b) = plan.batches.first() {
            println!("  first batch {b:?}");
        }
    }
    Ok(())
}
