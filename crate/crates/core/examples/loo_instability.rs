//! How far the remaining specimens move when one specimen is left out of the
//! superimposition, for a small and a large sample.

use morpho_leakage::experiments::run_loo_instability;
use morpho_leakage::sim::default_config;

fn main() -> morpho_leakage::Result<()> {
    let cfg = default_config(10, 4, 2);
    let records = run_loo_instability(&cfg, &[10, 50, 200], 30, 500, 42)?;
    for r in records.iter().filter(|r| r.replicate.is_none()) {
        println!("n = {:>3}  {:<28} {:.5}", r.n, r.metric, r.value);
    }
    Ok(())
}
