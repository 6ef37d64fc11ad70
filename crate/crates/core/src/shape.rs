//! Geometric primitives on single landmark configurations.
//!
//! A configuration is a `p x k` matrix: one row per landmark, one column per
//! spatial axis. Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::stats::median;

/// One specimen: `p` landmarks in `k` dimensions (`p >= 3`, `k` in {2, 3}).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfig {
    coords: DMatrix<f64>,
}

impl LandmarkConfig {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        let (p, k) = coords.shape();
        if p < 3 {
            return Err(Error::InvalidConfig(format!("need at least 3 landmarks, got {p}")));
        }
        if k != 2 && k != 3 {
            return Err(Error::InvalidConfig(format!("dimension must be 2 or 3, got {k}")));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite coordinate".into()));
        }
        Ok(Self { coords })
    }

    /// Builds a configuration from landmark rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::InvalidConfig(format!(
                "ragged landmark rows: {} vs {k} coordinates",
                bad.len()
            )));
        }
        Self::new(DMatrix::from_fn(p, k, |i, j| rows[i][j]))
    }

    /// Inverse of [`LandmarkConfig::vectorize`].
    pub fn from_vector(values: &[f64], p: usize, k: usize) -> Result<Self> {
        if values.len() != p * k {
            return Err(Error::LengthMismatch(values.len(), p * k));
        }
        Self::new(DMatrix::from_fn(p, k, |i, j| values[i * k + j]))
    }

    pub fn p(&self) -> usize {
        self.coords.nrows()
    }

    pub fn k(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn landmark(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    /// Column-wise mean, or column-wise median when `robust`.
    pub fn centroid(&self, robust: bool) -> Vec<f64> {
        (0..self.k())
            .map(|j| {
                let col: Vec<f64> = self.coords.column(j).iter().copied().collect();
                if robust {
                    median(&col)
                } else {
                    col.iter().sum::<f64>() / col.len() as f64
                }
            })
            .collect()
    }

    /// Translates the configuration so its centroid (mean or median) is at the origin.
    pub fn center(&self, robust: bool) -> Self {
        let c = self.centroid(robust);
        let mut coords = self.coords.clone();
        for (j, cj) in c.iter().enumerate() {
            coords.column_mut(j).add_scalar_mut(-cj);
        }
        Self { coords }
    }

    /// Square root of the summed squared landmark distances from the mean centroid.
    pub fn centroid_size(&self) -> Result<f64> {
        let size = self.center(false).coords.norm();
        if size > 0.0 && size.is_finite() {
            Ok(size)
        } else {
            Err(Error::DegenerateShape)
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coords: &self.coords * factor }
    }

    /// Centers (by mean) and rescales to unit centroid size.
    pub fn preshape(&self) -> Result<Self> {
        let centered = self.center(false);
        let size = centered.coords.norm();
        if size > 0.0 {
            Ok(centered.scaled(1.0 / size))
        } else {
            Err(Error::DegenerateShape)
        }
    }

    /// Right-multiplies the coordinates by a `k x k` rotation.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Self {
        Self { coords: &self.coords * rotation }
    }

    /// Landmark-major stacking: `(x1, y1[, z1], x2, y2[, z2], ...)`.
    pub fn vectorize(&self) -> DVector<f64> {
        let (p, k) = self.coords.shape();
        DVector::from_fn(p * k, |idx, _| self.coords[(idx / k, idx % k)])
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.coords.shape() != other.coords.shape() {
            return Err(Error::ShapeMismatch {
                expected_p: self.p(),
                expected_k: self.k(),
                found_p: other.p(),
                found_k: other.k(),
            });
        }
        Ok(())
    }
}

/// `x -> scale * x * rotation + translation`, applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    pub translation: DVector<f64>,
}

impl SimilarityTransform {
    pub fn identity(k: usize) -> Self {
        Self {
            rotation: DMatrix::identity(k, k),
            scale: 1.0,
            translation: DVector::zeros(k),
        }
    }

    pub fn rotation_only(rotation: DMatrix<f64>) -> Self {
        let k = rotation.nrows();
        Self { rotation, scale: 1.0, translation: DVector::zeros(k) }
    }

    /// Planar rotation by `angle` radians (row-vector convention).
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::rotation_only(DMatrix::from_row_slice(2, 2, &[c, s, -s, c]))
    }

    pub fn apply(&self, config: &LandmarkConfig) -> LandmarkConfig {
        let mut coords = &config.coords * &self.rotation * self.scale;
        for (j, t) in self.translation.iter().enumerate() {
            coords.column_mut(j).add_scalar_mut(*t);
        }
        LandmarkConfig { coords }
    }
}

/// Proper rotation `R` (det = +1) minimising `||source * R - target||_F`.
///
/// Both inputs are expected to be centered. Uses the SVD of `source^T target`
/// and flips the axis of the smallest singular value when the unconstrained
/// optimum would be a reflection.
pub fn optimal_rotation(source: &LandmarkConfig, target: &LandmarkConfig) -> Result<SimilarityTransform> {
    source.check_same_shape(target)?;
    Ok(SimilarityTransform::rotation_only(rotation_between(
        source.coords(),
        target.coords(),
    )?))
}

pub(crate) fn rotation_between(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cross = source.transpose() * target;
    let k = cross.nrows();
    let svd = thin_svd(&cross)?;
    let (u, v_t) = (&svd.u, &svd.v_t);
    let mut rotation = u * v_t;
    if rotation.determinant() < 0.0 {
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(k - 1);
        let mut flip = DMatrix::<f64>::identity(k, k);
        flip[(smallest, smallest)] = -1.0;
        rotation = u * flip * v_t;
    }
    Ok(rotation)
}

/// Frobenius distance between two configurations after centering, scaling to
/// unit centroid size and optimally rotating the first onto the second.
pub fn procrustes_distance(a: &LandmarkConfig, b: &LandmarkConfig) -> Result<f64> {
    a.check_same_shape(b)?;
    let a = a.preshape()?;
    let b = b.preshape()?;
    let r = rotation_between(a.coords(), b.coords())?;
    Ok((a.coords() * r - b.coords()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> LandmarkConfig {
        LandmarkConfig::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap()
    }

    fn chiral() -> LandmarkConfig {
        LandmarkConfig::from_rows(&[
            vec![0.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 2.0],
        ])
        .unwrap()
        .center(false)
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(LandmarkConfig::new(DMatrix::zeros(2, 2)).is_err());
        assert!(LandmarkConfig::new(DMatrix::zeros(4, 4)).is_err());
        let mut m = DMatrix::zeros(3, 2);
        m[(0, 0)] = f64::NAN;
        assert!(LandmarkConfig::new(m).is_err());
    }

    #[test]
    fn center_unit_square() {
        let c = square().center(false);
        let expected = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(c.landmark(i), row.to_vec());
        }
        assert_eq!(c.center(false), c);
    }

    #[test]
    fn robust_center_is_coordinatewise_median() {
        let cfg = LandmarkConfig::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![2.0, 1.0],
            vec![100.0, -40.0],
            vec![1.5, 0.2],
        ])
        .unwrap();
        let mean_c = cfg.centroid(false);
        let robust_c = cfg.centroid(true);
        assert_ne!(mean_c, robust_c);
        // direct median: xs sorted 0,1,1.5,2,100 -> 1.5; ys -40,0,0.2,0.5,1 -> 0.2
        assert_eq!(robust_c, vec![1.5, 0.2]);
        let centered = cfg.center(true);
        assert!(centered.centroid(true).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn centroid_size_of_square_and_degenerate() {
        let s = square().centroid_size().unwrap();
        assert!((s - 2.0 * 0.5f64.sqrt()).abs() < 1e-12);
        let scaled = square().scaled(3.5).centroid_size().unwrap();
        assert!((scaled - 3.5 * s).abs() < 1e-12);
        let flat = LandmarkConfig::from_rows(&vec![vec![3.0, 3.0]; 4]).unwrap();
        assert!(matches!(flat.centroid_size(), Err(Error::DegenerateShape)));
    }

    #[test]
    fn rotation_of_identical_shapes_is_identity() {
        let c = chiral();
        let r = optimal_rotation(&c, &c).unwrap().rotation;
        assert!((r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn recovers_known_planar_rotation() {
        let c = chiral();
        let truth = SimilarityTransform::planar(37f64.to_radians());
        let target = truth.apply(&c);
        let r = optimal_rotation(&c, &target).unwrap().rotation;
        assert!((r - truth.rotation).norm() < 1e-10);
    }

    #[test]
    fn reflected_target_still_gets_proper_rotation() {
        let c = chiral();
        let mirror = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let target = c.rotated(&mirror);
        let r = optimal_rotation(&c, &target).unwrap().rotation;
        assert!((r.determinant() - 1.0).abs() < 1e-10);
        assert!((r.transpose() * &r - DMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
        let residual = (c.coords() * &r - target.coords()).norm();
        // brute force over proper rotations: none reaches zero residual on a chiral config
        let best = (0..6284)
            .map(|i| {
                let rot = SimilarityTransform::planar(i as f64 * 1e-3);
                (c.coords() * &rot.rotation - target.coords()).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best > 0.1);
        assert!(residual > 0.1);
        assert!(residual <= best + 1e-6);
    }

    #[test]
    fn rotation_3d_is_proper() {
        let c = LandmarkConfig::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
            vec![1.0, 1.0, 1.5],
        ])
        .unwrap()
        .center(false);
        let mirror = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
        let r = optimal_rotation(&c, &c.rotated(&mirror)).unwrap().rotation;
        assert!((r.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn procrustes_distance_similarity_invariant() {
        let c = chiral();
        assert!(procrustes_distance(&c, &c).unwrap() < 1e-12);
        let moved = SimilarityTransform {
            rotation: SimilarityTransform::planar(std::f64::consts::FRAC_PI_2).rotation,
            scale: 5.0,
            translation: DVector::from_vec(vec![2.0, -7.0]),
        }
        .apply(&c);
        assert!(procrustes_distance(&c, &moved).unwrap() < 1e-10);
    }

    #[test]
    fn procrustes_distance_matches_grid_search() {
        let a = LandmarkConfig::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.1], vec![0.4, 1.3]]).unwrap();
        let b = LandmarkConfig::from_rows(&[vec![1.0, 1.0], vec![1.5, 3.0], vec![-0.7, 2.0]]).unwrap();
        let d = procrustes_distance(&a, &b).unwrap();
        let pa = a.preshape().unwrap();
        let pb = b.preshape().unwrap();
        let steps = (std::f64::consts::TAU / 1e-4).ceil() as usize;
        let best = (0..steps)
            .map(|i| {
                let rot = SimilarityTransform::planar(i as f64 * 1e-4).rotation;
                (pa.coords() * rot - pb.coords()).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((d - best).abs() < 1e-6, "{d} vs {best}");
        assert!((d - procrustes_distance(&b, &a).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn vectorize_is_landmark_major() {
        let c2 = LandmarkConfig::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 7.0]]).unwrap();
        assert_eq!(c2.vectorize().as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        let c3 = LandmarkConfig::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 10.0],
        ])
        .unwrap();
        assert_eq!(&c3.vectorize().as_slice()[..6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let back = LandmarkConfig::from_vector(c3.vectorize().as_slice(), 3, 3).unwrap();
        assert_eq!(back, c3);
    }
}
