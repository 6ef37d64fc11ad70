//! Train the two regressors directly on a synthetic linear target and dump
//! the loss trace and the learned weights.

use morpho_leakage::nn::{train_conv, train_linear, ConvSpec, TrainSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn main() -> morpho_leakage::Result<()> {
    let (p, k, n) = (6, 2, 120);
    let mut r = morpho_leakage::seeds::rng(9);
    let x = DMatrix::from_fn(n, p * k, |_, _| r.gen_range(-1.0..1.0));
    let w = DVector::from_fn(p * k, |i, _| (i as f64 * 0.5).sin());
    let y: DVector<f64> = &x * &w;

    let spec = TrainSpec { epochs: 300, batch_size: 32, learning_rate: 1e-2, ..TrainSpec::default() };
    let lin = train_linear(&x, &y, &spec)?;
    let conv = train_conv(&x, p, k, &y, &spec, &ConvSpec::default())?;
    for (name, hist) in [("linear", &lin.loss_history), ("conv", &conv.loss_history)] {
        let last = hist.last().copied().unwrap_or(f64::NAN);
        println!("{name:<7} loss {:.4} -> {:.6} over {} epochs", hist[0], last, hist.len());
    }
    lin.write_weights(std::io::stdout().lock())?;
    Ok(())
}
