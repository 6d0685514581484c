//! Prints the shifted-window attention mask of an 8×8 token grid with 4×4
//! windows rolled by 2: masked-pair counts per window, then the pattern of
//! the corner window (`.` attend, `x` masked).

use benthiq::swin::build_shift_mask;

fn main() -> benthiq::Result<()> {
    let (n, m, offset) = (8, 4, 2);
    let mask = build_shift_mask(n, n, m, offset)?;
    let bias = mask.bias.data();
    let t = m * m;
    for w in 0..mask.num_windows {
        let masked = bias[w * t * t..(w + 1) * t * t].iter().filter(|&&v| v != 0.0).count();
        println!("window {w}: {masked} of {} pairs masked", t * t);
    }
    let w = mask.num_windows - 1;
    println!("window {w}:");
    for a in 0..t {
        let row: String = (0..t)
            .map(|b| if bias[(w * t + a) * t + b] == 0.0 { '.' } else { 'x' })
            .collect();
        println!("  {row}");
    }
    Ok(())
}
