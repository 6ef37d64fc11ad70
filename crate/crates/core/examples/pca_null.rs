//! Cumulative PCA variance of isotropic shape variation after superimposition,
//! next to the flat-spectrum reference and the count of nonzero eigenvalues.

use morpho_leakage::stats::{isotropy_null_check, tangent_dimension};

fn main() -> morpho_leakage::Result<()> {
    for k in [2, 3] {
        for p in [5, 8, 20] {
            let check = isotropy_null_check(p, k, 100 * p, 1.0, 42)?;
            println!(
                "k={k} p={p:>2}  q={:>2}  nonzero={:>2}  V(p)={:.3}  flat={:.3}",
                tangent_dimension(p, k),
                check.nonzero_eigenvalues,
                check.empirical_slope,
                check.flat_expectation
            );
        }
    }
    Ok(())
}
