//! Saves a freshly built network, reloads it, and confirms identical logits.

use benthiq::data::{ImageTile, TileGenerator, SURVEY_FRACTIONS};
use benthiq::model::{load_checkpoint, save_checkpoint, BenthiqNet, ModelConfig};
use benthiq::{no_grad, Rng};

fn main() -> benthiq::Result<()> {
    let cfg = ModelConfig::desk();
    let mut rng = Rng::new(3);
    let net = BenthiqNet::build(&cfg, &mut rng)?;
    let path = std::env::temp_dir().join("benthiq_example.ckpt");
    save_checkpoint(&net, 3, 0, &path)?;
    let back = load_checkpoint(&path)?;
    let (img, _) = TileGenerator::new(cfg.input_size, &SURVEY_FRACTIONS)?.generate(&mut rng);
    let x = ImageTile::batch_tensor(&[&img])?;
    let (a, b) = no_grad(|| (net.forward(&x), back.forward(&x)));
    let same = a?.tensor.data() == b?.tensor.data();
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!(
        "{} ({bytes} bytes): logits identical after reload: {same}",
        path.display()
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
