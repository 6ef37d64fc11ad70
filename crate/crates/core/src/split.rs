//! Train/test partitioning and the two alignment protocols compared throughout
//! the crate.
//!
//! * [`align_clean`] superimposes the training specimens only and then fits
//!   every test specimen onto the frozen training reference, one at a time.
//! * [`align_contaminated`] superimposes the whole sample first and splits
//!   afterwards, so test specimens shape the reference the model is trained on.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gpa::{check_sample, gpa, standardize, AlignmentResult, GpaOptions};
use crate::seeds::rng;
use crate::shape::{rotation_between, LandmarkConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    pub fn len(&self) -> usize {
        self.train_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select<T: Clone>(&self, items: &[T]) -> (Vec<T>, Vec<T>) {
        (
            self.train_ids.iter().map(|&i| items[i].clone()).collect(),
            self.test_ids.iter().map(|&i| items[i].clone()).collect(),
        )
    }
}

/// Uniformly random partition with `round(train_fraction * n)` training indices.
/// Both index lists are returned in ascending order.
pub fn split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    if n < 4 {
        return Err(Error::InvalidSplit(format!("need at least 4 specimens, got {n}")));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidSplit(format!(
            "fraction {train_fraction} of {n} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let mut train_ids = order[..n_train].to_vec();
    let mut test_ids = order[n_train..].to_vec();
    train_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(SplitIndices { train_ids, test_ids, seed })
}

#[derive(Debug, Clone)]
pub struct SplitAlignment {
    pub train: Vec<LandmarkConfig>,
    pub test: Vec<LandmarkConfig>,
    pub reference: LandmarkConfig,
    /// The GPA run that produced `train` and `reference`.
    pub gpa: AlignmentResult,
}

/// Aligns one unseen specimen onto a frozen reference: center with the same
/// statistic as training, optionally scale to unit size, one optimal rotation.
pub fn align_to_reference(
    specimen: &LandmarkConfig,
    reference: &LandmarkConfig,
    opts: &GpaOptions,
) -> Result<LandmarkConfig> {
    reference.check_same_shape(specimen)?;
    let standardized = standardize(specimen, opts.robust, opts.scale)?;
    let r = rotation_between(&standardized, reference.coords())?;
    LandmarkConfig::new(standardized * r)
}

/// GPA on the training set only; test specimens never touch the reference.
pub fn align_clean(train: &[LandmarkConfig], test: &[LandmarkConfig], opts: &GpaOptions) -> Result<SplitAlignment> {
    let (p, k) = check_sample(train)?;
    if let Some(bad) = test.iter().find(|c| c.p() != p || c.k() != k) {
        return Err(Error::ShapeMismatch { expected_p: p, expected_k: k, found_p: bad.p(), found_k: bad.k() });
    }
    let result = gpa(train, opts)?;
    let test = test
        .par_iter()
        .map(|c| align_to_reference(c, &result.reference, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitAlignment { train: result.aligned.clone(), test, reference: result.reference.clone(), gpa: result })
}

/// GPA on the full sample, partitioned afterwards by `idx`.
pub fn align_contaminated(all: &[LandmarkConfig], idx: &SplitIndices, opts: &GpaOptions) -> Result<SplitAlignment> {
    if let Some(&bad) = idx.train_ids.iter().chain(&idx.test_ids).find(|&&i| i >= all.len()) {
        return Err(Error::InvalidSplit(format!("index {bad} out of range for {} specimens", all.len())));
    }
    let result = gpa(all, opts)?;
    let (train, test) = idx.select(&result.aligned);
    Ok(SplitAlignment { train, test, reference: result.reference.clone(), gpa: result })
}
