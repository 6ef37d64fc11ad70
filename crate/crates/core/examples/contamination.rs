//! Test RMSE of a size regression under contaminated versus clean alignment.
//! Negative deltas mean the contaminated pipeline looks better than it is.

use morpho_leakage::experiments::{contamination_once, run_contamination};
use morpho_leakage::gpa::GpaOptions;
use morpho_leakage::sim::{default_config, simulate};
use morpho_leakage::split::split;

fn main() -> morpho_leakage::Result<()> {
    let cfg = default_config(30, 4, 2).with_seed(5);
    let sample = simulate(&cfg)?;
    let one = contamination_once(&sample, &split(cfg.n, 0.7, 5)?, &GpaOptions::default())?;
    println!(
        "single split: clean {:.4}  contaminated {:.4}  delta {:+.4}",
        one.rmse_clean,
        one.rmse_contaminated,
        one.delta_rmse()
    );

    let records = run_contamination(&cfg, 200, 1000, 42)?;
    for r in records.iter().filter(|r| r.replicate.is_none()) {
        println!("{:<24} {:+.5}", r.metric, r.value);
    }
    Ok(())
}
