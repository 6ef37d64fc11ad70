//! Refit the boundary under each simulation preset and report how much the
//! slope moves.

use morpho_leakage::experiments::{run_sensitivity, DEFAULT_THRESHOLD_QUANTILE};
use morpho_leakage::sim::sensitivity_presets;

fn main() -> morpho_leakage::Result<()> {
    let ns: Vec<usize> = (20..=140).step_by(20).collect();
    let ps: Vec<usize> = (4..=48).step_by(4).collect();
    let presets = sensitivity_presets(20, 4, 2);
    let result = run_sensitivity(&presets, &ns, &ps, 5, DEFAULT_THRESHOLD_QUANTILE, 42)?;
    for (name, fit) in &result.fits {
        println!("{name:<12} slope {:.3}  intercept {:+.2}", fit.slope, fit.intercept);
    }
    println!("largest slope difference {:.4}", result.max_slope_spread());
    Ok(())
}
