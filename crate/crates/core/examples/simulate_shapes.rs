//! Draw a small sample of sheared, scaled regular polygons and print it in
//! the landmark text format, followed by the ground-truth table.

use morpho_leakage::io::{numbered, write_landmarks};
use morpho_leakage::sim::{default_config, simulate};

fn main() -> morpho_leakage::Result<()> {
    let cfg = default_config(5, 6, 2).with_seed(11);
    let sample = simulate(&cfg)?;
    let stdout = std::io::stdout();
    write_landmarks(stdout.lock(), &numbered(&sample.configs))?;
    println!();
    sample.write_truth_csv(stdout.lock())?;
    Ok(())
}
