//! Linear versus convolutional regressor on clean-aligned coordinates.
//! The conv kernel slides along the landmark index; neither model has an
//! activation, so the comparison is about parameterisation under a fixed
//! training budget.

use morpho_leakage::experiments::{run_spatial, spatial_once};
use morpho_leakage::nn::{ConvSpec, TrainSpec};
use morpho_leakage::sim::default_config;

fn main() -> morpho_leakage::Result<()> {
    let cfg = default_config(90, 4, 2);
    let train = TrainSpec::default();
    let conv = ConvSpec::default();

    let one = spatial_once(&cfg, &train, &conv, 1)?;
    println!("one replicate: linear {:.4}  conv {:.4}", one.rmse_linear, one.rmse_conv);

    let records = run_spatial(&cfg, 40, &train, &conv, 500, 42)?;
    for r in records.iter().filter(|r| r.replicate.is_none()) {
        println!("{:<8} {:<28} {:.4}", r.condition, r.metric, r.value);
    }
    Ok(())
}
