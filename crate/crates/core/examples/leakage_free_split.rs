//! Split a simulated sample, then align it twice: the clean way (reference
//! from training specimens only, test specimens fitted onto it one by one)
//! and the contaminated way (everything superimposed together).
//! Changing the test set leaves the clean training coordinates untouched.

use morpho_leakage::gpa::GpaOptions;
use morpho_leakage::shape::procrustes_distance;
use morpho_leakage::sim::{default_config, simulate};
use morpho_leakage::split::{align_clean, align_contaminated, split};

fn main() -> morpho_leakage::Result<()> {
    let sample = simulate(&default_config(40, 6, 2).with_seed(3))?;
    let idx = split(sample.len(), 0.7, 3)?;
    let (train, test) = idx.select(&sample.configs);
    let opts = GpaOptions::default();

    let clean = align_clean(&train, &test, &opts)?;
    let dirty = align_contaminated(&sample.configs, &idx, &opts)?;
    println!("train {} / test {}", train.len(), test.len());
    println!(
        "reference shift caused by test data: {:.2e}",
        procrustes_distance(&clean.reference, &dirty.reference)?
    );

    let only_half = align_clean(&train, &test[..test.len() / 2], &opts)?;
    let moved = clean
        .train
        .iter()
        .zip(&only_half.train)
        .map(|(a, b)| (a.coords() - b.coords()).abs().max())
        .fold(0.0_f64, f64::max);
    println!("max change in clean training coordinates when the test set changes: {moved:.1e}");
    Ok(())
}
