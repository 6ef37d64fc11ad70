//! Clean-pipeline RMSE over a sample-size by landmark-count grid, the fitted
//! instability boundary, and the heatmap with the boundary drawn on it.

use morpho_leakage::experiments::{fit_boundary, run_grid, DEFAULT_THRESHOLD_QUANTILE};
use morpho_leakage::render::render_heatmap;
use morpho_leakage::sim::default_config;

fn main() -> morpho_leakage::Result<()> {
    let ns: Vec<usize> = (20..=140).step_by(20).collect();
    let ps: Vec<usize> = (4..=48).step_by(4).collect();
    let records = run_grid(&ns, &ps, &default_config(20, 4, 2), "default", 8, 42)?;
    let fit = fit_boundary(&records, DEFAULT_THRESHOLD_QUANTILE)?;
    println!("p = {:.3} n + {:.3}  ({} columns)", fit.slope, fit.intercept, fit.cells_used);
    for (n, p) in &fit.frontier {
        println!("  n = {n:>3}  frontier p = {p}");
    }
    let out = std::env::temp_dir().join("morpho_grid_heatmap.svg");
    render_heatmap(&records, "rmse_clean", Some(&fit), &out)?;
    println!("heatmap written to {}", out.display());
    Ok(())
}
