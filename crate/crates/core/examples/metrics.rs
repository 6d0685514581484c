//! Scores a predicted mask against ground truth: per-class IOU, mIOU over
//! present classes, and border versus interior accuracy.

use benthiq::data::{class_name, MaskTile};
use benthiq::metrics::{border_mask, Evaluator};

fn main() -> benthiq::Result<()> {
    #[rustfmt::skip]
    let gt = MaskTile::new(4, 4, vec![
        0, 0, 1, 1,
        0, 0, 1, 1,
        3, 3, 1, 1,
        3, 3, 3, 3,
    ])?;
    #[rustfmt::skip]
    let pred = MaskTile::new(4, 4, vec![
        0, 0, 0, 1,
        0, 0, 1, 1,
        3, 1, 1, 1,
        3, 3, 3, 0,
    ])?;
    let mut eval = Evaluator::new(4);
    let r = eval.add(&pred, &gt)?;
    for (c, iou) in r.per_class_iou.iter().enumerate() {
        match iou {
            Some(v) => println!("{:<6} IOU {v:.2}", class_name(c)),
            None => println!("{:<6} absent", class_name(c)),
        }
    }
    println!("mIOU {:.2}", r.miou);
    println!("border pixels {}", border_mask(&gt).count());
    println!(
        "border accuracy {:?}, interior accuracy {:?}",
        r.border_accuracy, r.interior_accuracy
    );
    Ok(())
}
