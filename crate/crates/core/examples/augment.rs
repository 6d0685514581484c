//! Samples augmentation plans and shows that geometric steps move labels
//! together with pixels while photometric steps leave the mask alone.

use benthiq::data::{AugmentPlan, AugmentationConfig, TileGenerator, SURVEY_FRACTIONS};
use benthiq::Rng;

fn main() -> benthiq::Result<()> {
    let mut rng = Rng::new(5);
    let (img, mask) = TileGenerator::new(64, &SURVEY_FRACTIONS)?.generate(&mut rng);
    let cfg = AugmentationConfig::default();
    for i in 0..6 {
        let plan = AugmentPlan::sample(&cfg, &mut rng);
        let (a, m) = plan.apply(&img, &mask)?;
        let changed = m.labels.iter().zip(&mask.labels).filter(|(x, y)| x != y).count();
        let mean = a.pixels.iter().map(|&p| p as f64).sum::<f64>() / a.pixels.len() as f64;
        println!("draw {i}: {plan:?}");
        println!("        {changed} labels moved, mean intensity {mean:.1}");
    }
    Ok(())
}
