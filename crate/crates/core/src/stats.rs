//! Closed-form statistics: least squares, RMSE, PCA, percentile bootstrap and
//! the isotropic-variance null expectation for Procrustes tangent space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gpa::{gpa, GpaOptions};
use crate::linalg::thin_svd;
use crate::seeds::{derive_seed, rng};
use crate::shape::LandmarkConfig;
use crate::sim::base_shape;

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Linear-interpolation quantile (`h = (n - 1) q`) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Weights on the vectorized (landmark-major) coordinates.
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub train_rmse: f64,
}

impl FitResult {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = x * &self.coefficients;
        out.add_scalar_mut(self.intercept);
        out
    }
}

/// Stacks vectorized configurations into an `n x (k p)` design matrix.
pub fn design_matrix(configs: &[LandmarkConfig]) -> DMatrix<f64> {
    let d = configs.first().map_or(0, |c| c.p() * c.k());
    let mut x = DMatrix::zeros(configs.len(), d);
    for (i, c) in configs.iter().enumerate() {
        x.row_mut(i).copy_from(&c.vectorize().transpose());
    }
    x
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.ncols(), |j, _| x.column(j).mean())
}

/// Least squares with an unpenalised intercept.
///
/// Singular values below `OLS_RCOND * s_max` are treated as exact zeros.
///
/// Aligned landmark coordinates carry structural null directions (centering,
/// rotation) that survive as round-off at about `1e-15 * s_max`; inverting
/// them turns that round-off into arbitrarily large coefficients.
pub const OLS_RCOND: f64 = 1e-10;

/// Solves on the column-centered design with a truncated SVD, so rank-deficient
/// problems return the minimum-norm coefficient vector.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(y.len(), n));
    }
    let x_mean = column_means(x);
    let y_mean = y.mean();
    let mut xc = x.clone();
    for (j, m) in x_mean.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-m);
    }
    let yc = y.add_scalar(-y_mean);

    let coefficients = if x.ncols() == 0 {
        DVector::zeros(0)
    } else {
        let svd = thin_svd(&xc)?;
        let (u, v_t) = (&svd.u, &svd.v_t);
        let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let cutoff = s_max * OLS_RCOND;
        let uty = u.transpose() * &yc;
        let mut scaled = DVector::zeros(svd.singular_values.len());
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s > cutoff && *s > 0.0 {
                scaled[i] = uty[i] / s;
            }
        }
        v_t.transpose() * scaled
    };
    let intercept = y_mean - x_mean.dot(&coefficients);
    let mut fit = FitResult { coefficients, intercept, train_rmse: 0.0 };
    fit.train_rmse = rmse(y.as_slice(), fit.predict(x).as_slice())?;
    Ok(fit)
}

/// `sqrt(mean((pred - truth)^2))`.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::EmptySample);
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (b - a).powi(2)).sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `n x r`, equal to `U * Sigma`.
    pub scores: DMatrix<f64>,
    /// `d x r`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `sigma_i^2 / (n - 1)`.
    pub eigenvalues: DVector<f64>,
    pub mean_vector: DVector<f64>,
}

impl PcaResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut x = &self.scores * self.loadings.transpose();
        for mut row in x.row_iter_mut() {
            row += self.mean_vector.transpose();
        }
        x
    }
}

/// PCA via SVD of the column-centered data; keeps `r = min(n - 1, d)` components.
pub fn pca(x: &DMatrix<f64>) -> Result<PcaResult> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::OutOfRange(format!("PCA needs at least 2 rows, got {n}")));
    }
    let mean_vector = column_means(x);
    let mut xc = x.clone();
    for (j, m) in mean_vector.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-m);
    }
    let svd = thin_svd(&xc)?;
    let r = (n - 1).min(d);
    let singular_values = svd.singular_values.rows(0, r).into_owned();
    let mut scores = DMatrix::zeros(n, r);
    let mut loadings = DMatrix::zeros(d, r);
    for i in 0..r {
        scores.set_column(i, &(svd.u.column(i) * singular_values[i]));
        loadings.set_column(i, &svd.v_t.row(i).transpose());
    }
    let eigenvalues = singular_values.map(|s| s * s / (n - 1) as f64);
    Ok(PcaResult { scores, loadings, singular_values, eigenvalues, mean_vector })
}

/// Share of total variance carried by the first `m` components.
pub fn cumulative_variance(res: &PcaResult, m: usize) -> Result<f64> {
    let r = res.rank();
    if m == 0 || m > r {
        return Err(Error::OutOfRange(format!("component count {m} outside 1..={r}")));
    }
    if m == r {
        return Ok(1.0);
    }
    let total: f64 = res.eigenvalues.iter().sum();
    Ok(res.eigenvalues.iter().take(m).sum::<f64>() / total)
}

/// Dimension of Procrustes tangent space: `kp - k - k(k-1)/2 - 1`.
pub fn tangent_dimension(p: usize, k: usize) -> usize {
    k * p - k - k * (k - 1) / 2 - 1
}

/// Projects aligned configurations into the tangent plane at `reference`.
///
/// Each configuration is first rotated onto the reference, then its component
/// along the (unit-normalised) reference is removed. The results lie in a
/// linear subspace of dimension [`tangent_dimension`].
pub fn tangent_coordinates(aligned: &[LandmarkConfig], reference: &LandmarkConfig) -> Result<DMatrix<f64>> {
    let pole = reference.coords() / reference.coords().norm();
    let rows: Vec<DVector<f64>> = aligned
        .par_iter()
        .map(|c| {
            let r = crate::shape::rotation_between(c.coords(), &pole)?;
            let rotated = c.coords() * r;
            let along = rotated.dot(&pole);
            let projected = LandmarkConfig::new(rotated - &pole * along)?;
            Ok(projected.vectorize())
        })
        .collect::<Result<_>>()?;
    let d = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

#[derive(Debug, Clone)]
pub struct NullCheck {
    /// `alpha / (k + 1)`.
    pub expected_slope: f64,
    /// Observed `V(m)` at `m = round(alpha p)`.
    pub empirical_slope: f64,
    /// Flat-spectrum reference `m / q`.
    pub flat_expectation: f64,
    pub components: usize,
    pub nonzero_eigenvalues: usize,
    pub tangent_dim: usize,
    pub eigenvalues: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Landmark SD used to generate isotropic shape variation for the null check.
pub const NULL_CHECK_NOISE: f64 = 0.05;

/// Simulates isotropic Gaussian variation about a regular base shape, runs
/// scaled GPA, projects into tangent space and compares the cumulative
/// variance at `m = alpha * p` with the predicted slope `alpha / (k + 1)`.
pub fn isotropy_null_check(p: usize, k: usize, n: usize, alpha: f64, seed: u64) -> Result<NullCheck> {
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange(format!("alpha must be positive, got {alpha}")));
    }
    let base = base_shape(p, k)?;
    let configs: Vec<LandmarkConfig> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(derive_seed(seed, &[i as u64]));
            let noise = DMatrix::from_fn(p, k, |_, _| {
                let draw: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
                NULL_CHECK_NOISE * draw
            });
            LandmarkConfig::new(base.coords() + noise)
        })
        .collect::<Result<_>>()?;
    let aligned = gpa(&configs, &GpaOptions { scale: true, tol: 1e-14, max_iter: 500, robust: false })?;
    let tangent = tangent_coordinates(&aligned.aligned, &aligned.reference)?;
    let res = pca(&tangent)?;
    let top = res.eigenvalues.iter().copied().fold(0.0, f64::max);
    let nonzero = res.eigenvalues.iter().filter(|&&l| l > 1e-9 * top).count();
    let q = tangent_dimension(p, k);
    let usable = nonzero.min(res.rank()).max(1);
    let m = ((alpha * p as f64).round() as usize).clamp(1, usable);
    let total: f64 = res.eigenvalues.iter().take(usable).sum();
    let cumulative: Vec<f64> = res
        .eigenvalues
        .iter()
        .take(usable)
        .scan(0.0, |acc, l| {
            *acc += l;
            Some(*acc / total)
        })
        .collect();
    Ok(NullCheck {
        expected_slope: alpha / (k as f64 + 1.0),
        empirical_slope: cumulative[m - 1],
        flat_expectation: m as f64 / q as f64,
        components: m,
        nonzero_eigenvalues: nonzero,
        tangent_dim: q,
        eigenvalues: res.eigenvalues.iter().copied().collect(),
        cumulative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], level: f64, reps: usize, seed: u64) -> Result<BootstrapCi> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfRange(format!("confidence level {level} not in (0, 1)")));
    }
    if reps == 0 {
        return Err(Error::OutOfRange("bootstrap needs at least one resample".into()));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut r = rng(derive_seed(seed, &[b as u64]));
            (0..n).map(|_| values[r.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        mean: mean(values),
        lower: quantile_sorted(&means, tail),
        upper: quantile_sorted(&means, 1.0 - tail),
    })
}
