//! Monte Carlo studies built from the simulator, the two alignment protocols
//! and the regressors. Every study returns flat [`ExperimentRecord`]s keyed by
//! `(experiment, n, p, k, condition, replicate, metric)`.
//!
//! Replicate seeds are derived from the master seed and the cell coordinates,
//! never from execution order, so results do not depend on thread count.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gpa::{frame_displacements, gpa, GpaOptions};
use crate::nn::{train_conv, train_linear, ConvSpec, TrainSpec};
use crate::seeds::{derive_seed, rng, tag};
use crate::sim::{simulate, ShapeSample, SimConfig};
use crate::split::{align_clean, align_contaminated, split, SplitIndices};
use crate::stats::{
    bootstrap_ci, design_matrix, isotropy_null_check, mean, ols_fit, quantile_sorted, rmse, tangent_dimension,
    FitResult,
};

pub const TRAIN_FRACTION: f64 = 0.7;
pub const CI_LEVEL: f64 = 0.95;

/// Sample size and landmark count of the default 2D study configuration.
pub const DEFAULT_N: usize = 30;
pub const DEFAULT_P: usize = 4;
/// Sample size for the regressor comparison: its 70% training share equals the batch size.
pub const SPATIAL_N: usize = 90;
pub const LOO_SIZES: [usize; 2] = [10, 200];

/// `20, 40, ..., 200`
pub fn default_grid_n() -> Vec<usize> {
    (1..=10).map(|i| 20 * i).collect()
}

/// `4, 8, ..., 64`
pub fn default_grid_p() -> Vec<usize> {
    (1..=16).map(|i| 4 * i).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub condition: String,
    /// `None` marks a summary row aggregated over replicates.
    pub replicate: Option<usize>,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

impl ExperimentRecord {
    fn sort_key(&self) -> (&str, &str, usize, usize, usize, Option<usize>, &str) {
        (&self.experiment, &self.condition, self.k, self.n, self.p, self.replicate, &self.metric)
    }
}

pub const CSV_HEADER: &str = "experiment,n,p,k,condition,replicate,seed,metric,value";

pub fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Sorts, then writes with the fixed header. Values use shortest round-trip formatting.
pub fn write_records_csv<W: Write>(mut out: W, records: &mut [ExperimentRecord]) -> Result<()> {
    sort_records(records);
    writeln!(out, "{CSV_HEADER}")?;
    for r in records.iter() {
        let rep = r.replicate.map(|i| i.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{},{},{},{:?}", r.experiment, r.n, r.p, r.k, r.condition, rep, r.seed, r.metric, r.value)?;
    }
    Ok(())
}

pub fn read_records_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(err(format!("expected 9 fields, got {}", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s}: {e}")));
            Ok(ExperimentRecord {
                experiment: f[0].to_string(),
                n: int(f[1])?,
                p: int(f[2])?,
                k: int(f[3])?,
                condition: f[4].to_string(),
                replicate: if f[5].is_empty() { None } else { Some(int(f[5])?) },
                seed: f[6].parse().map_err(|e| err(format!("{}: {e}", f[6])))?,
                metric: f[7].to_string(),
                value: f[8].parse().map_err(|e| err(format!("{}: {e}", f[8])))?,
            })
        })
        .collect()
}

struct Key<'a> {
    experiment: &'a str,
    n: usize,
    p: usize,
    k: usize,
    condition: &'a str,
}

impl Key<'_> {
    fn record(&self, replicate: Option<usize>, seed: u64, metric: &str, value: f64) -> ExperimentRecord {
        ExperimentRecord {
            experiment: self.experiment.to_string(),
            n: self.n,
            p: self.p,
            k: self.k,
            condition: self.condition.to_string(),
            replicate,
            seed,
            metric: metric.to_string(),
            value,
        }
    }

    fn summary(&self, metric: &str, values: &[f64], boot_reps: usize, seed: u64) -> Result<Vec<ExperimentRecord>> {
        let ci = bootstrap_ci(values, CI_LEVEL, boot_reps, seed)?;
        Ok(vec![
            self.record(None, seed, &format!("{metric}_mean"), ci.mean),
            self.record(None, seed, &format!("{metric}_ci_lower"), ci.lower),
            self.record(None, seed, &format!("{metric}_ci_upper"), ci.upper),
        ])
    }
}

fn replicate_seed(master: u64, experiment: &str, n: usize, p: usize, k: usize, rep: usize) -> u64 {
    derive_seed(master, &[tag(experiment), n as u64, p as u64, k as u64, rep as u64])
}

/// Leave-one-out alignment instability. For each replicate a sample of size
/// `n` is aligned whole and again with one random specimen removed; the
/// recorded value is the mean displacement of the retained specimens between
/// the two solutions after registering one onto the other.
pub fn loo_displacement(sample: &[crate::shape::LandmarkConfig], drop: usize, opts: &GpaOptions) -> Result<f64> {
    if drop >= sample.len() {
        return Err(Error::OutOfRange(format!("specimen {drop} of {}", sample.len())));
    }
    let full = gpa(sample, opts)?;
    let reduced_input: Vec<_> = sample.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, c)| c.clone()).collect();
    let reduced = gpa(&reduced_input, opts)?;
    let kept: Vec<_> = full.aligned.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, c)| c.clone()).collect();
    Ok(mean(&frame_displacements(&reduced.aligned, &kept)?))
}

pub fn run_loo_instability(
    cfg: &SimConfig,
    sizes: &[usize],
    replicates: usize,
    boot_reps: usize,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    const NAME: &str = "loo";
    if let Some(&bad) = sizes.iter().find(|&&n| n < 3) {
        return Err(Error::InvalidConfig(format!("leave-one-out needs n >= 3, got {bad}")));
    }
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    let opts = GpaOptions::default();
    let mut out = Vec::new();
    for &n in sizes {
        let cell = cfg.clone().with_size(n, cfg.p);
        cell.validate()?;
        let key = Key { experiment: NAME, n, p: cell.p, k: cell.k, condition: "default" };
        let values = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let s = replicate_seed(seed, NAME, n, cell.p, cell.k, rep);
                let sample = simulate(&cell.clone().with_seed(derive_seed(s, &[0])))?;
                let drop = rng(derive_seed(s, &[1])).gen_range(0..n);
                Ok((s, loo_displacement(&sample.configs, drop, &opts)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (rep, (s, v)) in values.iter().enumerate() {
            out.push(key.record(Some(rep), *s, "mean_displacement", *v));
        }
        let vals: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
        out.extend(key.summary("mean_displacement", &vals, boot_reps, derive_seed(seed, &[tag(NAME), n as u64]))?);
    }
    sort_records(&mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ContaminationOutcome {
    pub rmse_clean: f64,
    pub rmse_contaminated: f64,
    pub clean_fit: FitResult,
    pub contaminated_fit: FitResult,
    /// Design columns `k * p` reached the training row count.
    pub rank_deficient: bool,
}

impl ContaminationOutcome {
    /// Contaminated minus clean; negative means leakage flattered the model.
    pub fn delta_rmse(&self) -> f64 {
        self.rmse_contaminated - self.rmse_clean
    }
}

fn response(sample: &ShapeSample, ids: &[usize]) -> DVector<f64> {
    DVector::from_iterator(ids.len(), ids.iter().map(|&i| sample.size_factors[i]))
}

/// One replicate of the contamination comparison on a given sample and split:
/// both pipelines fit OLS on aligned training coordinates to predict the size
/// factor and are scored on the same test specimens.
pub fn contamination_once(sample: &ShapeSample, idx: &SplitIndices, opts: &GpaOptions) -> Result<ContaminationOutcome> {
    let (train, test) = idx.select(&sample.configs);
    let y_train = response(sample, &idx.train_ids);
    let y_test = response(sample, &idx.test_ids);

    let clean = align_clean(&train, &test, opts)?;
    let dirty = align_contaminated(&sample.configs, idx, opts)?;

    let clean_fit = ols_fit(&design_matrix(&clean.train), &y_train)?;
    let contaminated_fit = ols_fit(&design_matrix(&dirty.train), &y_train)?;
    let rmse_clean = rmse(y_test.as_slice(), clean_fit.predict(&design_matrix(&clean.test)).as_slice())?;
    let rmse_contaminated = rmse(y_test.as_slice(), contaminated_fit.predict(&design_matrix(&dirty.test)).as_slice())?;
    let (p, k) = (sample.configs[0].p(), sample.configs[0].k());
    Ok(ContaminationOutcome {
        rmse_clean,
        rmse_contaminated,
        clean_fit,
        contaminated_fit,
        rank_deficient: k * p >= idx.train_ids.len(),
    })
}

fn contamination_replicate(cfg: &SimConfig, rep_seed: u64) -> Result<ContaminationOutcome> {
    let sample = simulate(&cfg.clone().with_seed(derive_seed(rep_seed, &[0])))?;
    let idx = split(cfg.n, TRAIN_FRACTION, derive_seed(rep_seed, &[1]))?;
    contamination_once(&sample, &idx, &GpaOptions::default())
}

fn contamination_cell(
    name: &str,
    cfg: &SimConfig,
    condition: &str,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<ExperimentRecord>, Vec<ContaminationOutcome>)> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    cfg.validate()?;
    let key = Key { experiment: name, n: cfg.n, p: cfg.p, k: cfg.k, condition };
    let outcomes = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let s = replicate_seed(seed, name, cfg.n, cfg.p, cfg.k, rep);
            contamination_replicate(cfg, s).map(|o| (s, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(4 * replicates);
    for (rep, (s, o)) in outcomes.iter().enumerate() {
        records.push(key.record(Some(rep), *s, "rmse_clean", o.rmse_clean));
        records.push(key.record(Some(rep), *s, "rmse_contaminated", o.rmse_contaminated));
        records.push(key.record(Some(rep), *s, "delta_rmse", o.delta_rmse()));
        records.push(key.record(Some(rep), *s, "rank_deficient", if o.rank_deficient { 1.0 } else { 0.0 }));
    }
    Ok((records, outcomes.into_iter().map(|(_, o)| o).collect()))
}

/// Replicated contamination comparison at one `(n, p)`, with per-replicate
/// rows plus bootstrap summaries of each RMSE and of the difference.
pub fn run_contamination(cfg: &SimConfig, replicates: usize, boot_reps: usize, seed: u64) -> Result<Vec<ExperimentRecord>> {
    const NAME: &str = "contamination";
    let (mut records, outcomes) = contamination_cell(NAME, cfg, "default", replicates, seed)?;
    let key = Key { experiment: NAME, n: cfg.n, p: cfg.p, k: cfg.k, condition: "default" };
    let boot_seed = derive_seed(seed, &[tag(NAME), tag("bootstrap")]);
    let delta: Vec<f64> = outcomes.iter().map(|o| o.delta_rmse()).collect();
    let clean: Vec<f64> = outcomes.iter().map(|o| o.rmse_clean).collect();
    let dirty: Vec<f64> = outcomes.iter().map(|o| o.rmse_contaminated).collect();
    records.extend(key.summary("delta_rmse", &delta, boot_reps, boot_seed)?);
    records.extend(key.summary("rmse_clean", &clean, boot_reps, boot_seed)?);
    records.extend(key.summary("rmse_contaminated", &dirty, boot_reps, boot_seed)?);
    sort_records(&mut records);
    Ok(records)
}

/// Contamination replicates at every `(n, p)` cell. Only per-replicate rows
/// are emitted; see [`cell_means`] for aggregation. Cells whose design has at
/// least as many columns as training rows carry `rank_deficient = 1`.
pub fn run_grid(
    n_values: &[usize],
    p_values: &[usize],
    base: &SimConfig,
    condition: &str,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    const NAME: &str = "grid";
    if n_values.is_empty() || p_values.is_empty() {
        return Err(Error::InvalidConfig("grid axes must be nonempty".into()));
    }
    let cells: Vec<(usize, usize)> = n_values.iter().flat_map(|&n| p_values.iter().map(move |&p| (n, p))).collect();
    let per_cell = cells
        .par_iter()
        .map(|&(n, p)| contamination_cell(NAME, &base.clone().with_size(n, p), condition, replicates, seed).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ExperimentRecord> = per_cell.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Mean of `metric` per `(n, p)` over per-replicate rows, sorted by `(n, p)`.
pub fn cell_means(records: &[ExperimentRecord], metric: &str) -> Vec<(usize, usize, f64)> {
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    for r in records.iter().filter(|r| r.metric == metric && r.replicate.is_some()) {
        groups.entry((r.n, r.p)).or_default().push(r.value);
    }
    groups.into_iter().map(|((n, p), v)| (n, p, mean(&v))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFit {
    pub slope: f64,
    pub intercept: f64,
    pub threshold: f64,
    /// Frontier points the line was fitted through.
    pub cells_used: usize,
    pub frontier: Vec<(usize, usize)>,
}

pub const BOUNDARY_METRIC: &str = "rmse_clean";

/// Default within-grid quantile separating stable from unstable cells.
pub const DEFAULT_THRESHOLD_QUANTILE: f64 = 0.8;

/// Binarizes cell-mean clean RMSE at the given within-grid quantile (stable =
/// at or below it). Scanning each `n` column upward from the smallest `p`, the
/// first unstable run above a stable base is located and its crest, the cell
/// of largest mean RMSE (lowest `p` on ties), becomes the frontier point.
/// A line `p = slope * n + intercept` is fitted through the frontier by least
/// squares. Columns that are stable throughout or unstable from the first
/// cell carry no crossing and are left out.
///
/// On a step-shaped surface the crest is the first unstable cell; on a ridge
/// it is the ridge line itself.
pub fn fit_boundary(records: &[ExperimentRecord], threshold_quantile: f64) -> Result<BoundaryFit> {
    fit_boundary_on(&cell_means(records, BOUNDARY_METRIC), threshold_quantile)
}

pub fn fit_boundary_on(cells: &[(usize, usize, f64)], threshold_quantile: f64) -> Result<BoundaryFit> {
    if !(0.0..=1.0).contains(&threshold_quantile) {
        return Err(Error::OutOfRange(format!("quantile {threshold_quantile} not in [0, 1]")));
    }
    let mut ns: Vec<usize> = cells.iter().map(|c| c.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::BoundaryUndefined(format!("need at least 3 distinct n values, got {}", ns.len())));
    }
    let mut values: Vec<f64> = cells.iter().map(|c| c.2).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite cell mean".into()));
    }
    values.sort_by(f64::total_cmp);
    let threshold = quantile_sorted(&values, threshold_quantile);
    let stable = |v: f64| v <= threshold;
    if cells.iter().all(|c| stable(c.2)) || !cells.iter().any(|c| stable(c.2)) {
        return Err(Error::BoundaryUndefined("grid is not split into stable and unstable cells".into()));
    }

    let mut frontier = Vec::new();
    for &n in &ns {
        let mut column: Vec<(usize, f64)> = cells.iter().filter(|c| c.0 == n).map(|c| (c.1, c.2)).collect();
        column.sort_by_key(|c| c.0);
        let base = column.iter().take_while(|c| stable(c.1)).count();
        if base == 0 || base == column.len() {
            continue;
        }
        let band = column[base..].iter().take_while(|c| !stable(c.1));
        let crest = band.fold(None::<(usize, f64)>, |best, &c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        });
        if let Some((p, _)) = crest {
            frontier.push((n, p));
        }
    }
    if frontier.len() < 3 {
        return Err(Error::BoundaryUndefined(format!("only {} columns cross the threshold", frontier.len())));
    }
    let xs: Vec<f64> = frontier.iter().map(|f| f.0 as f64).collect();
    let ys: Vec<f64> = frontier.iter().map(|f| f.1 as f64).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::BoundaryUndefined("frontier has a single n value".into()));
    }
    let slope = sxy / sxx;
    Ok(BoundaryFit { slope, intercept: my - slope * mx, threshold, cells_used: frontier.len(), frontier })
}

/// Boundary rows for a fitted grid, keyed by condition.
pub fn boundary_records(fit: &BoundaryFit, k: usize, condition: &str, seed: u64) -> Vec<ExperimentRecord> {
    let key = Key { experiment: "boundary", n: 0, p: 0, k, condition };
    vec![
        key.record(None, seed, "slope", fit.slope),
        key.record(None, seed, "intercept", fit.intercept),
        key.record(None, seed, "threshold", fit.threshold),
        key.record(None, seed, "cells_used", fit.cells_used as f64),
    ]
}

#[derive(Debug, Clone)]
pub struct SensitivityResult {
    pub records: Vec<ExperimentRecord>,
    pub fits: Vec<(String, BoundaryFit)>,
}

impl SensitivityResult {
    /// Largest absolute difference between any two preset slopes.
    pub fn max_slope_spread(&self) -> f64 {
        let slopes: Vec<f64> = self.fits.iter().map(|f| f.1.slope).collect();
        let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// A grid plus boundary fit per named preset. Presets share replicate seeds,
/// so they differ only in the simulation parameters.
pub fn run_sensitivity(
    presets: &[(String, SimConfig)],
    n_values: &[usize],
    p_values: &[usize],
    replicates: usize,
    threshold_quantile: f64,
    seed: u64,
) -> Result<SensitivityResult> {
    let mut records = Vec::new();
    let mut fits = Vec::new();
    for (name, cfg) in presets {
        let grid = run_grid(n_values, p_values, cfg, name, replicates, seed)?;
        let fit = fit_boundary(&grid, threshold_quantile)?;
        records.extend(boundary_records(&fit, cfg.k, name, seed));
        records.extend(grid);
        fits.push((name.clone(), fit));
    }
    sort_records(&mut records);
    Ok(SensitivityResult { records, fits })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialOutcome {
    pub rmse_linear: f64,
    pub rmse_conv: f64,
}

pub fn spatial_once(cfg: &SimConfig, train: &TrainSpec, conv: &ConvSpec, rep_seed: u64) -> Result<SpatialOutcome> {
    let sample = simulate(&cfg.clone().with_seed(derive_seed(rep_seed, &[0])))?;
    let idx = split(cfg.n, TRAIN_FRACTION, derive_seed(rep_seed, &[1]))?;
    let (tr, te) = idx.select(&sample.configs);
    let aligned = align_clean(&tr, &te, &GpaOptions::default())?;
    let (x_train, x_test) = (design_matrix(&aligned.train), design_matrix(&aligned.test));
    let y_train = response(&sample, &idx.train_ids);
    let y_test = response(&sample, &idx.test_ids);
    let spec = TrainSpec { seed: derive_seed(rep_seed, &[2]), ..train.clone() };
    let linear = train_linear(&x_train, &y_train, &spec)?;
    let conv = train_conv(&x_train, cfg.p, cfg.k, &y_train, &spec, conv)?;
    Ok(SpatialOutcome {
        rmse_linear: rmse(y_test.as_slice(), linear.predict(&x_test).as_slice())?,
        rmse_conv: rmse(y_test.as_slice(), conv.predict(&x_test).as_slice())?,
    })
}

/// Paired linear vs convolutional test RMSE on clean-aligned data. Both models
/// see the same split and the same training seed in each replicate.
pub fn run_spatial(
    cfg: &SimConfig,
    replicates: usize,
    train: &TrainSpec,
    conv: &ConvSpec,
    boot_reps: usize,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    const NAME: &str = "spatial";
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    cfg.validate()?;
    train.validate()?;
    let outcomes = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let s = replicate_seed(seed, NAME, cfg.n, cfg.p, cfg.k, rep);
            spatial_once(cfg, train, conv, s).map(|o| (s, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let boot_seed = derive_seed(seed, &[tag(NAME), tag("bootstrap")]);
    for (condition, pick) in [("linear", 0usize), ("conv", 1)] {
        let key = Key { experiment: NAME, n: cfg.n, p: cfg.p, k: cfg.k, condition };
        let vals: Vec<f64> = outcomes.iter().map(|(_, o)| if pick == 0 { o.rmse_linear } else { o.rmse_conv }).collect();
        for (rep, ((s, _), v)) in outcomes.iter().zip(&vals).enumerate() {
            records.push(key.record(Some(rep), *s, "rmse", *v));
        }
        records.extend(key.summary("rmse", &vals, boot_reps, boot_seed)?);
    }
    let key = Key { experiment: NAME, n: cfg.n, p: cfg.p, k: cfg.k, condition: "paired" };
    let wins = outcomes.iter().filter(|(_, o)| o.rmse_conv < o.rmse_linear).count();
    records.push(key.record(None, boot_seed, "conv_win_fraction", wins as f64 / replicates as f64));
    sort_records(&mut records);
    Ok(records)
}

/// Isotropic null check over `(p, k, alpha)` with `n = n_multiplier * q`.
pub fn run_pca_null(
    p_values: &[usize],
    k_values: &[usize],
    n_multiplier: usize,
    alpha_values: &[f64],
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    const NAME: &str = "pca_null";
    let mut records = Vec::new();
    for &k in k_values {
        for &p in p_values {
            let q = tangent_dimension(p, k);
            let n = n_multiplier * q;
            for &alpha in alpha_values {
                let s = derive_seed(seed, &[tag(NAME), p as u64, k as u64]);
                let check = isotropy_null_check(p, k, n, alpha, s)?;
                let condition = format!("alpha={alpha}");
                let key = Key { experiment: NAME, n, p, k, condition: &condition };
                records.push(key.record(None, s, "expected_slope", check.expected_slope));
                records.push(key.record(None, s, "empirical_slope", check.empirical_slope));
                records.push(key.record(None, s, "flat_expectation", check.flat_expectation));
                records.push(key.record(None, s, "components", check.components as f64));
                records.push(key.record(None, s, "nonzero_eigenvalues", check.nonzero_eigenvalues as f64));
                records.push(key.record(None, s, "tangent_dim", check.tangent_dim as f64));
            }
        }
    }
    sort_records(&mut records);
    Ok(records)
}
