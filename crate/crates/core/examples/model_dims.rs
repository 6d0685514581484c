//! Traces the feature-map chain of the desk network and reports parameter
//! counts for the desk and full-size configurations.

use benthiq::data::{ImageTile, TileGenerator, SURVEY_FRACTIONS};
use benthiq::model::{BenthiqNet, ModelConfig};
use benthiq::Rng;

fn main() -> benthiq::Result<()> {
    let cfg = ModelConfig::desk();
    let mut rng = Rng::new(1);
    let net = BenthiqNet::build(&cfg, &mut rng)?;
    let (img, _) = TileGenerator::new(cfg.input_size, &SURVEY_FRACTIONS)?.generate(&mut rng);
    let (logits, chain) = net.forward_traced(&ImageTile::batch_tensor(&[&img])?)?;
    for s in &chain {
        println!("{:<28} {:>4}x{:<4} {:>4} ch", s.name, s.height, s.width, s.channels);
    }
    println!(
        "logits: {}x{} with {} classes",
        logits.height(),
        logits.width(),
        logits.classes()
    );
    println!("desk parameters:   {}", net.num_parameters());
    let full = BenthiqNet::build(&ModelConfig::swin_t(), &mut rng)?;
    println!("swin_t parameters: {}", full.num_parameters());
    Ok(())
}
