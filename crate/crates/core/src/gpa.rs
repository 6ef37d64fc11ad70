//! Iterative Generalized Procrustes Analysis over a full sample.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::shape::{rotation_between, LandmarkConfig};
use crate::stats::median;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpaOptions {
    /// Coordinate-wise median instead of mean for centering and the reference.
    pub robust: bool,
    /// Normalise every configuration to unit centroid size.
    pub scale: bool,
    /// Stop once `|Q_prev - Q| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GpaOptions {
    fn default() -> Self {
        Self { robust: false, scale: true, tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub aligned: Vec<LandmarkConfig>,
    /// Mean (or coordinate-wise median) of `aligned`.
    pub reference: LandmarkConfig,
    /// Objective value after each rotation sweep.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub scaled: bool,
    pub robust: bool,
}

impl AlignmentResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn check_sample(configs: &[LandmarkConfig]) -> Result<(usize, usize)> {
    let first = configs.first().ok_or(Error::EmptySample)?;
    for c in &configs[1..] {
        first.check_same_shape(c)?;
    }
    Ok((first.p(), first.k()))
}

/// Pairwise objective `(1/n) * sum_i sum_j ||X_i - X_j||_F^2` over ordered pairs.
///
/// Evaluates the configurations as given; nothing is aligned here.
pub fn objective_q(configs: &[LandmarkConfig]) -> Result<f64> {
    check_sample(configs)?;
    let n = configs.len();
    let mut total = 0.0;
    for a in configs {
        for b in configs {
            total += (a.coords() - b.coords()).norm_squared();
        }
    }
    Ok(total / n as f64)
}

/// Same value as [`objective_q`], via `2 * sum_i ||X_i - mean||^2`.
pub(crate) fn objective_via_mean(coords: &[DMatrix<f64>]) -> f64 {
    let mean = mean_matrix(coords);
    2.0 * coords.iter().map(|c| (c - &mean).norm_squared()).sum::<f64>()
}

pub(crate) fn mean_matrix(coords: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(coords[0].nrows(), coords[0].ncols());
    for c in coords {
        acc += c;
    }
    acc / coords.len() as f64
}

fn median_matrix(coords: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (p, k) = coords[0].shape();
    DMatrix::from_fn(p, k, |i, j| {
        let vals: Vec<f64> = coords.iter().map(|c| c[(i, j)]).collect();
        median(&vals)
    })
}

fn central(coords: &[DMatrix<f64>], robust: bool) -> DMatrix<f64> {
    if robust {
        median_matrix(coords)
    } else {
        mean_matrix(coords)
    }
}

/// Centers a configuration with the chosen statistic and optionally rescales it
/// to unit centroid size. Shared by training GPA and test-specimen alignment.
pub(crate) fn standardize(config: &LandmarkConfig, robust: bool, scale: bool) -> Result<DMatrix<f64>> {
    let size = config.centroid_size()?;
    let centered = config.center(robust);
    Ok(if scale { centered.coords() / size } else { centered.into_coords() })
}

/// Generalized Procrustes Analysis.
///
/// Centers every configuration, optionally scales to unit centroid size, then
/// alternates between rotating each specimen onto the reference and
/// recomputing the reference, until the objective changes by less than
/// `opts.tol` or `opts.max_iter` sweeps have run. The reference starts as the
/// first (standardized) specimen.
pub fn gpa(sample: &[LandmarkConfig], opts: &GpaOptions) -> Result<AlignmentResult> {
    check_sample(sample)?;
    if sample.len() < 2 {
        return Err(Error::EmptySample);
    }
    let mut coords: Vec<DMatrix<f64>> = sample
        .par_iter()
        .map(|c| standardize(c, opts.robust, opts.scale))
        .collect::<Result<_>>()?;

    let mut reference = coords[0].clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        coords = coords
            .par_iter()
            .map(|c| {
                let r = rotation_between(c, &reference)?;
                let mut rotated = c * r;
                if opts.scale {
                    // keep unit size exactly; rotation only drifts it by rounding
                    let norm = rotated.norm();
                    rotated /= norm;
                }
                Ok(rotated)
            })
            .collect::<Result<_>>()?;
        reference = central(&coords, opts.robust);
        let q = objective_via_mean(&coords);
        let done = history.last().is_some_and(|prev: &f64| (prev - q).abs() < opts.tol);
        history.push(q);
        if done {
            converged = true;
            break;
        }
    }

    let aligned = coords
        .into_iter()
        .map(LandmarkConfig::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(AlignmentResult {
        aligned,
        reference: LandmarkConfig::new(reference)?,
        objective_history: history,
        iterations,
        converged,
        scaled: opts.scale,
        robust: opts.robust,
    })
}

/// Per-specimen displacement between two alignments of the same specimens.
///
/// `moved` is registered onto `fixed` with a single global rotation (GPA output
/// orientation is arbitrary), then the Frobenius distance between each pair of
/// corresponding aligned configurations is returned. Individual specimens are
/// not re-fitted, so shifts caused by a different sample composition survive.
pub fn frame_displacements(fixed: &[LandmarkConfig], moved: &[LandmarkConfig]) -> Result<Vec<f64>> {
    if fixed.len() != moved.len() {
        return Err(Error::LengthMismatch(fixed.len(), moved.len()));
    }
    let (p, k) = check_sample(fixed)?;
    check_sample(moved)?;
    fixed[0].check_same_shape(&moved[0])?;
    let stack = |set: &[LandmarkConfig]| {
        let mut m = DMatrix::zeros(set.len() * p, k);
        for (i, c) in set.iter().enumerate() {
            m.rows_mut(i * p, p).copy_from(c.coords());
        }
        m
    };
    let r = rotation_between(&stack(moved), &stack(fixed))?;
    Ok(fixed
        .iter()
        .zip(moved)
        .map(|(a, b)| (a.coords() - b.coords() * &r).norm())
        .collect())
}
