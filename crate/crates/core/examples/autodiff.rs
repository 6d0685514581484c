//! Fits `y = 3x − 1` with a one-unit linear layer, then checks one reverse-mode
//! gradient against a central difference.

use benthiq::{no_grad, ParamStore, Rng, Sgd, Tensor};

fn main() -> benthiq::Result<()> {
    let mut rng = Rng::new(0);
    let xs: Vec<f32> = (0..32).map(|_| rng.range(-1.0, 1.0)).collect();
    let ys: Vec<f32> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    let x = Tensor::new(&[32, 1], xs)?;
    let y = Tensor::new(&[32, 1], ys)?;

    let mut store = ParamStore::new();
    let w = store.add("w", &[1, 1], vec![0.0])?;
    let b = store.add("b", &[1], vec![0.0])?;
    let loss_of = |s: &ParamStore| -> benthiq::Result<Tensor> {
        let err = x.linear(s.tensor(w), Some(s.tensor(b)))?.sub(&y)?;
        Ok(err.mul(&err)?.mean())
    };

    let sgd = Sgd::new(0.1);
    for step in 0..200 {
        store.zero_grads();
        let loss = loss_of(&store)?;
        loss.backward()?;
        sgd.step(&mut store)?;
        if step % 50 == 0 {
            println!("step {step:>3}  loss {:.5}", loss.item()?);
        }
    }
    println!(
        "w = {:.4}, b = {:.4}",
        store.tensor(w).data()[0],
        store.tensor(b).data()[0]
    );

    store.zero_grads();
    loss_of(&store)?.backward()?;
    let analytic = store.tensor(w).grad().unwrap()[0];
    let base = store.tensor(w).to_vec();
    let h = 1e-3;
    let mut at = |v: f32| {
        store.set_values("w", vec![v], None).unwrap();
        no_grad(|| loss_of(&store).unwrap().item().unwrap())
    };
    let numeric = (at(base[0] + h) - at(base[0] - h)) / (2.0 * h);
    println!("dL/dw analytic {analytic:.6}, central difference {numeric:.6}");
    Ok(())
}
