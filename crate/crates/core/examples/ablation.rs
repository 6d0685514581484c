//! Small input-size by upsampling sweep on a synthetic dataset.

use benthiq::run::{render_ablation_table, run_ablate, run_synth, RunConfig};

fn main() -> benthiq::Result<()> {
    let root = std::env::temp_dir().join("benthiq_ablation_example");
    let cfg = RunConfig::from_text(&format!(
        "lr = 0.01\nepochs = 2\nsynth.tiles = 24\nablate.input_sizes = 128,256\n\
         ablate.upsampling = patch_split,bicubic\nablate.variants = swin_t_mini\n\
         data_dir = {0}/data\nout_dir = {0}/out",
        root.display()
    ))?;
    run_synth(&cfg, true)?;
    let rows = run_ablate(&cfg)?;
    print!("{}", render_ablation_table(&rows, cfg.model.num_classes));
    Ok(())
}
