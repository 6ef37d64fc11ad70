//! Generalized Procrustes superimposition of randomly placed copies of a
//! pentagon, with the objective trace and the robust (median) variant.

use morpho_leakage::gpa::{gpa, GpaOptions};
use morpho_leakage::shape::SimilarityTransform;
use morpho_leakage::sim::base_shape;

fn main() -> morpho_leakage::Result<()> {
    let pentagon = base_shape(5, 2)?;
    let copies: Vec<_> = (0..8)
        .map(|i| {
            let t = SimilarityTransform::planar(0.7 * i as f64);
            t.apply(&pentagon).scaled(1.0 + i as f64)
        })
        .collect();

    let result = gpa(&copies, &GpaOptions::default())?;
    println!("iterations {}  converged {}", result.iterations, result.converged);
    for (i, q) in result.objective_history.iter().enumerate() {
        println!("  sweep {i:>2}  Q = {q:.3e}");
    }
    println!("reference landmarks:");
    for i in 0..result.reference.p() {
        println!("  {:?}", result.reference.landmark(i));
    }

    let robust = gpa(&copies, &GpaOptions { robust: true, ..GpaOptions::default() })?;
    println!("median reference, Q = {:.3e}", robust.final_objective());
    Ok(())
}
